import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FakeNode
from packsim.engine import seconds
from packsim.metrics import FtpFlow
from packsim.packet import TcpSegment
from packsim.tcp import (TcpConfig, TcpReceiver, make_sender, vegas_window_update,
                         westwood_filter, westwood_ssthresh)


def sender(fake_node, variant, cwnd=None, una=1, nxt=1):
    fake_node.metrics.add_flow(FtpFlow(0, 0, 1, 0))
    snd = make_sender(variant, fake_node, 0, 1, TcpConfig())
    if cwnd is not None:
        for seq in range(1, nxt):
            snd.send_segment(seq)
        snd.snd_una, snd.snd_nxt = una, nxt
        snd.state.cwnd = float(cwnd)
        fake_node.routing.sent.clear()
    return snd


def ack(n, miss=0, count=0, echo=-1):
    return TcpSegment(0, ack_no=n, is_ack=True, ts_echo=echo, miss_seqno=miss,
                      num_miss_seqno=count)


def sent_seqs(fake_node):
    return [p.payload.seqno for p in fake_node.routing.sent]


def test_new_connection_starts_with_one_segment(fake_node):
    snd = sender(fake_node, "newreno")
    assert snd.cwnd == 1.0
    assert snd.state.ssthresh == 65
    snd.start()
    assert sent_seqs(fake_node) == [1]


def test_ssthresh_from_65_kbytes_and_mss():
    assert TcpConfig(mss_bytes=1000, init_ssthresh_bytes=65536).init_ssthresh == 65


def test_slow_start_then_linear_growth(fake_node):
    snd = sender(fake_node, "tahoe", cwnd=64, una=1, nxt=2)
    snd.state.ssthresh = 65.0
    snd.on_ack(ack(1))
    assert snd.cwnd == 65.0
    snd.on_ack(ack(2))
    assert snd.cwnd == pytest.approx(65.0 + 1 / 65.0)


@pytest.mark.parametrize("variant", ["reno", "newreno"])
def test_three_dupacks_halve_the_window(fake_node, variant):
    snd = sender(fake_node, variant, cwnd=20, una=5, nxt=25)
    for _ in range(3):
        snd.on_ack(ack(4))
    assert snd.state.ssthresh == 10.0
    assert snd.cwnd == 13.0
    assert sent_seqs(fake_node)[0] == 5
    snd.on_ack(ack(24))
    assert snd.cwnd == 10.0
    assert not snd.state.in_recovery


def test_tahoe_dupacks_restart_slow_start(fake_node):
    snd = sender(fake_node, "tahoe", cwnd=20, una=5, nxt=25)
    for _ in range(3):
        snd.on_ack(ack(4))
    assert snd.state.ssthresh == 10.0
    assert snd.cwnd == 1.0
    assert sent_seqs(fake_node) == [5]


def test_newreno_partial_ack_retransmits_next_hole(fake_node):
    snd = sender(fake_node, "newreno", cwnd=10, una=5, nxt=15)
    for _ in range(3):
        snd.on_ack(ack(4))
    fake_node.routing.sent.clear()
    snd.on_ack(ack(8))
    assert snd.state.in_recovery
    assert sent_seqs(fake_node)[0] == 9


def test_reno_leaves_recovery_on_partial_ack(fake_node):
    snd = sender(fake_node, "reno", cwnd=10, una=5, nxt=15)
    for _ in range(3):
        snd.on_ack(ack(4))
    snd.on_ack(ack(8))
    assert not snd.state.in_recovery


@pytest.mark.parametrize("variant", ["tahoe", "reno", "newreno"])
def test_timeout_resets_window(fake_node, variant):
    snd = sender(fake_node, variant, cwnd=16, una=1, nxt=17)
    snd.arm_timer(restart=True)
    fake_node.sim.run_until(fake_node.sim.now + snd.rto)
    assert snd.state.ssthresh == 8.0
    assert snd.cwnd == 1.0
    assert snd.timeouts == 1
    assert sent_seqs(fake_node) == [1]


def test_westwood_ssthresh_example():
    # 125000 B/s * 0.08 s / 1000 B = 10 segments
    assert westwood_ssthresh(125_000.0, 0.08, 1000) == pytest.approx(10.0)
    assert 125_000 * 0.08 / 1000 == 10


def test_westwood_uses_estimate_on_dupacks(fake_node):
    snd = sender(fake_node, "westwood", cwnd=30, una=5, nxt=35)
    snd.state.bwe = 125_000.0
    snd.state.rtt_min = 0.08e9
    for _ in range(3):
        snd.on_ack(ack(4))
    assert snd.state.ssthresh == pytest.approx(10.0)
    assert snd.cwnd == pytest.approx(10.0)


def test_westwood_filter_converges_to_steady_rate(fake_node):
    snd = sender(fake_node, "westwood", cwnd=1, una=1, nxt=1)
    snd.last_ack_time = 0
    for k in range(1, 400):
        fake_node.sim.run_until(seconds(0.01 * k))
        snd.bandwidth_sample(1, fake_node.sim.now)
    assert snd.state.bwe == pytest.approx(100_000.0, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 2.5e5), min_size=1, max_size=200), st.floats(0.01, 1.0))
def test_westwood_estimate_stays_within_sample_bounds(samples, gain):
    bwe = 0.0
    for s in samples:
        bwe = westwood_filter(bwe, s, gain)
        assert bwe >= 0.0
    assert min(samples) - 1e-6 <= bwe <= max(samples) + 1e-6


def test_vegas_diff_example():
    new, diff, expected, actual = vegas_window_update(10, 0.1, 0.2, 2.0, 4.0)
    assert diff == pytest.approx(5.0)
    assert new == 9
    assert expected == pytest.approx(100.0) and actual == pytest.approx(50.0)


@pytest.mark.parametrize("srtt,delta", [(0.105, 1), (0.13, 0)])
def test_vegas_window_between_thresholds(srtt, delta):
    new, diff, _, _ = vegas_window_update(10, 0.1, srtt, 2.0, 4.0)
    assert new == 10 + delta


def test_vegas_retransmits_early_when_fine_timer_expired(fake_node):
    snd = sender(fake_node, "vegas", cwnd=10, una=5, nxt=15)
    snd.state.srtt = float(seconds(0.05))
    snd.state.rttvar = float(seconds(0.01))
    # past the fine-grained timeout, before the coarse RTO
    fake_node.sim.run_until(seconds(0.5))
    assert snd.timeouts == 0
    snd.on_ack(ack(4))
    assert snd.fast_retransmits == 1
    assert sent_seqs(fake_node)[0] == 5


def test_vegas_waits_for_three_dupacks_within_fine_timer(fake_node):
    snd = sender(fake_node, "vegas", cwnd=10, una=5, nxt=15)
    snd.state.srtt = float(seconds(5.0))
    snd.state.rttvar = float(seconds(1.0))
    snd.on_ack(ack(4))
    snd.on_ack(ack(4))
    assert snd.fast_retransmits == 0
    snd.on_ack(ack(4))
    assert snd.fast_retransmits == 1


def test_unknown_variant_rejected(fake_node):
    with pytest.raises(ValueError):
        make_sender("cubic", fake_node, 0, 1, TcpConfig())


def test_receiver_delivers_in_order_once():
    node = FakeNode(1)
    node.metrics.add_flow(FtpFlow(0, 0, 1, 0))
    for s in (1, 2, 3, 4, 5):
        node.metrics.data_sent(0, s, 0, True)
    rcv = TcpReceiver(node, 0, 0)
    acks = [rcv.on_data(TcpSegment(0, seqno=s)).ack_no for s in (1, 3, 2, 2, 5, 4)]
    assert acks == [1, 1, 3, 3, 3, 5]
    assert node.metrics.flows[0].app_log == [1, 2, 3, 4, 5]
    assert rcv.duplicates == 1
