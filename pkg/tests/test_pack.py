import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain_config
from packsim import pack
from packsim.metrics import FtpFlow
from packsim.network import Network
from packsim.packet import ACK, BROADCAST, OHPACK, PACK, PACK_SIZE, Packet, PackPacket, TcpSegment
from packsim.tcp import TcpConfig, make_sender


def run_checker(stream, proxy=7):
    state = pack.SeqCheckerState(connection=(0, 9))
    outcomes, exp_trace = [], []
    for s in stream:
        outcomes.append(pack.check_sequence(state, s, proxy))
        exp_trace.append(state.exp_seqno)
    return outcomes, exp_trace, state


def checker_gaps(stream):
    outcomes, _, _ = run_checker(stream)
    return [(o.first, o.count) for o in outcomes if o.kind == pack.MISSING]


# -- sequence checker ------------------------------------------------------

def test_gap_walkthrough_example():
    outcomes, exp_trace, _ = run_checker([1, 2, 3, 4, 7, 8, 9, 5])
    kinds = [o.kind for o in outcomes]
    assert kinds == [pack.IN_ORDER] * 4 + [pack.MISSING, pack.IN_ORDER, pack.IN_ORDER,
                                           pack.RETRANSMISSION]
    assert outcomes[4] == pack.Outcome(pack.MISSING, 5, 2)
    assert exp_trace == [1, 2, 3, 4, 7, 8, 9, 9]


def test_proxy_change_rebases_expectation():
    state = pack.SeqCheckerState(connection=(0, 9))
    for s in range(1, 11):
        pack.check_sequence(state, s, 3)
    out = pack.check_sequence(state, 42, 5)
    assert out.kind == pack.PROXY_CHANGED
    assert state.exp_seqno == 42
    assert state.now_proxy == 5
    assert pack.check_sequence(state, 43, 5).kind == pack.IN_ORDER


def test_non_proxy_cannot_check():
    state = pack.SeqCheckerState(connection=(0, 9), is_proxy=False)
    with pytest.raises(pack.NotProxyError):
        pack.check_sequence(state, 1, 3)


def test_oracle_on_hand_examples():
    assert pack.oracle_gaps([1, 2, 3, 4, 7, 8, 9, 5]) == [(5, 2)]
    assert pack.oracle_gaps([1, 3, 2, 6, 4, 5]) == [(2, 1), (4, 2)]
    assert pack.oracle_gaps([1, 2, 2, 3]) == []


segment_streams = st.integers(2, 500).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.integers(1, n), max_size=30),
    st.integers(0, 2**32).map(random.Random)))


def build_stream(n, extra, rnd):
    """Segment 1 first, then 2..n with drops, local reordering and retransmits."""
    body = [s for s in range(2, n + 1) if rnd.random() > 0.1]
    for i in range(len(body) - 1):
        if rnd.random() < 0.1:
            body[i], body[i + 1] = body[i + 1], body[i]
    for s in extra:
        body.insert(rnd.randrange(len(body) + 1), s)
    return ([1] + body)[:500]


@settings(max_examples=300, deadline=None)
@given(segment_streams)
def test_checker_matches_set_difference_oracle(args):
    n, extra, rnd = args
    stream = build_stream(n, extra, rnd)
    assert checker_gaps(stream) == pack.oracle_gaps(stream)


@settings(max_examples=200, deadline=None)
@given(segment_streams)
def test_expectation_never_decreases(args):
    n, extra, rnd = args
    _, exp_trace, _ = run_checker(build_stream(n, extra, rnd))
    assert all(a <= b for a, b in zip(exp_trace, exp_trace[1:]))


# -- source reaction ---------------------------------------------------------

def sender_with_window(fake_node, una=5, nxt=10):
    fake_node.metrics.add_flow(FtpFlow(0, 0, 1, 0))
    snd = make_sender("newreno", fake_node, 0, 1, TcpConfig())
    for seq in range(1, nxt):
        snd.send_segment(seq)
    snd.snd_una, snd.snd_nxt = una, nxt
    fake_node.routing.sent.clear()
    return snd


def test_pack_retransmits_every_missing_segment_first(fake_node):
    snd = sender_with_window(fake_node)
    cwnd = snd.cwnd
    assert snd.on_pack_notification(5, 2) == 2
    assert [p.payload.seqno for p in fake_node.routing.sent] == [5, 6]
    assert snd.cwnd == cwnd


def test_duplicate_pack_within_rto_is_not_retransmitted_twice(fake_node):
    snd = sender_with_window(fake_node)
    snd.on_pack_notification(5, 2)
    assert snd.on_pack_notification(5, 2) == 0
    assert [p.payload.seqno for p in fake_node.routing.sent] == [5, 6]
    assert snd.pack_retransmits == 2


def test_pack_for_already_acked_segments_is_ignored(fake_node):
    snd = sender_with_window(fake_node, una=8)
    assert snd.on_pack_notification(5, 2) == 0
    assert fake_node.routing.sent == []


# -- routing-layer handling ----------------------------------------------------

def small_part_network():
    cfg = chain_config(4, routing={"protocol": "part", "pack": True})
    return Network(cfg)


def test_pack_carries_gap_fields_and_ohpack_is_one_hop():
    net = small_part_network()
    agent = net.nodes[2].routing
    net.nodes[2].upstream[0] = 1
    assert pack.send_pack(agent, 0, 0, 5, 2)
    frames = list(net.nodes[2].mac.queue) + [net.nodes[2].mac.current]
    kinds = {f.payload.kind: f for f in frames if f is not None}
    assert kinds[PACK].dst_mac == 1
    info = kinds[PACK].payload.payload
    assert (info.miss_seqno, info.num_miss_seqno) == (5, 2)
    assert kinds[OHPACK].dst_mac == BROADCAST
    assert kinds[OHPACK].payload.ttl == 1
    assert net.metrics.control[PACK] == 1 and net.metrics.control[OHPACK] == 1


def test_pack_without_upstream_is_suppressed():
    net = small_part_network()
    assert not pack.send_pack(net.nodes[2].routing, 0, 0, 5, 2)


def test_intermediate_node_updates_table_and_forwards():
    net = small_part_network()
    agent = net.nodes[1].routing
    agent.update_route(0, 0, 1, 1)
    pkt = Packet(PACK, 2, 0, PackPacket(0, 5, 2, 0, 2), PACK_SIZE)
    agent.recv(pkt, 2)
    rt = agent.table[0]
    assert (rt.miss_seqno, rt.num_miss_seqno) == (5, 2)
    sent = [f.payload for f in list(net.nodes[1].mac.queue) + [net.nodes[1].mac.current] if f]
    assert any(p.kind == PACK for p in sent)


def test_ohpack_neighbour_augments_passing_ack_once():
    net = small_part_network()
    agent = net.nodes[1].routing
    agent.update_route(0, 0, 1, 1)
    agent.recv(Packet(OHPACK, 2, BROADCAST, PackPacket(0, 5, 2, 0, 2), PACK_SIZE, ttl=1), 2)
    ack = Packet(ACK, 4, 0, TcpSegment(0, ack_no=4, is_ack=True), 40)
    assert pack.augment_ack(agent, ack)
    assert (ack.payload.miss_seqno, ack.payload.num_miss_seqno) == (5, 2)
    ack2 = Packet(ACK, 4, 0, TcpSegment(0, ack_no=4, is_ack=True), 40)
    assert not pack.augment_ack(agent, ack2)


def test_ohpack_with_wider_ttl_is_rejected():
    net = small_part_network()
    with pytest.raises(AssertionError):
        net.nodes[1].routing.recv(
            Packet(OHPACK, 2, BROADCAST, PackPacket(0, 5, 2, 0, 2), PACK_SIZE, ttl=2), 2)


def test_source_reacts_to_augmented_ack(fake_node):
    snd = sender_with_window(fake_node)
    ack = TcpSegment(0, ack_no=4, is_ack=True, miss_seqno=5, num_miss_seqno=2)
    snd.on_ack(ack)
    assert [p.payload.seqno for p in fake_node.routing.sent][:2] == [5, 6]


def test_random_stream_generator_is_seeded():
    a = build_stream(50, [3, 4], random.Random(1))
    b = build_stream(50, [3, 4], random.Random(1))
    assert a == b and a[0] == 1
