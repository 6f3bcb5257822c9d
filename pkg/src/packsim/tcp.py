"""Segment-indexed TCP with Tahoe, Reno, NewReno, Vegas and Westwood.

Sequence numbers count segments starting at 1.  The receiver acks every
data segment with the highest in-order seqno (cumulative), so three
duplicate acks mean the segment after ``ack_no`` is probably lost.
"""
from dataclasses import dataclass

from .engine import NS_PER_S, seconds
from .packet import ACK, DATA, IP_HEADER, TCP_HEADER, Packet, TcpSegment

VARIANTS = ("tahoe", "reno", "newreno", "vegas", "westwood")


@dataclass
class TcpConfig:
    variant: str = "newreno"
    mss_bytes: int = 1000
    init_ssthresh_bytes: int = 65536
    rwnd_segments: int = 65
    rto_init_s: float = 1.0
    rto_min_s: float = 0.2
    rto_max_s: float = 60.0
    max_backoffs: int = 8
    vegas_alpha: float = 2.0
    vegas_beta: float = 4.0
    vegas_gamma: float = 1.0
    ww_filter_gain: float = 0.1

    @property
    def init_ssthresh(self):
        return self.init_ssthresh_bytes // self.mss_bytes


@dataclass
class CwndState:
    variant: str
    cwnd: float = 1.0
    ssthresh: float = 65.0
    dupacks: int = 0
    srtt: float = 0.0
    rttvar: float = 0.0
    rto: int = NS_PER_S
    in_recovery: bool = False
    recover: int = 0
    base_rtt: float = 0.0
    expected_rate: float = 0.0
    actual_rate: float = 0.0
    bwe: float = 0.0
    rtt_min: float = 0.0


def vegas_window_update(cwnd, base_rtt, srtt, alpha=2.0, beta=4.0):
    """One per-RTT Vegas step; returns ``(new_cwnd, diff, expected, actual)``.

    ``diff`` is the estimated number of segments queued in the network.
    """
    expected = cwnd / base_rtt
    actual = cwnd / srtt
    diff = (expected - actual) * base_rtt
    if diff < alpha:
        cwnd += 1
    elif diff > beta:
        cwnd -= 1
    return max(cwnd, 1.0), diff, expected, actual


def westwood_filter(bwe, sample, gain):
    if bwe <= 0:
        return sample
    return (1 - gain) * bwe + gain * sample


def westwood_ssthresh(bwe, rtt_min_s, mss):
    return max(bwe * rtt_min_s / mss, 2.0)


class TcpSender:
    """FTP-style bulk sender; always has data queued."""

    variant = "tahoe"

    def __init__(self, node, flow, dst, config, start_at=0):
        self.node = node
        self.sim = node.sim
        self.flow = flow
        self.dst = dst
        self.cfg = config
        self.mss = config.mss_bytes
        self.start_at = start_at
        self.state = CwndState(self.variant, ssthresh=float(config.init_ssthresh),
                               rto=seconds(config.rto_init_s))
        self.rto_min = seconds(config.rto_min_s)
        self.rto_max = seconds(config.rto_max_s)
        self.snd_una = 1
        self.snd_nxt = 1
        self.max_sent = 0
        self.backoffs = 0
        self.deadline = None
        self.timer = None
        self.last_progress = start_at
        self.last_ack_time = None
        self.sent_time = {}
        self.tx_count = {}
        self.pack_rtx_until = {}
        self.pack_retransmits = 0
        self.fast_retransmits = 0
        self.timeouts = 0
        self.resets = 0
        self.started = False
        self.cwnd_log = None

    # -- helpers ------------------------------------------------------------

    @property
    def cwnd(self):
        return self.state.cwnd

    @property
    def rto(self):
        return self.state.rto

    def outstanding(self):
        return self.snd_nxt - self.snd_una

    def window(self):
        return min(int(self.state.cwnd), self.cfg.rwnd_segments)

    def trace(self, event, detail=""):
        self.node.trace("AGT", event, f"flow={self.flow} {detail}")

    def log(self, event, seq):
        """Append ``(time, event, seq, cwnd, ssthresh)`` when logging is on."""
        if self.cwnd_log is not None:
            self.cwnd_log.append((self.sim.now, event, seq, self.state.cwnd, self.state.ssthresh))

    def start(self):
        self.started = True
        self.last_progress = self.sim.now
        self.last_ack_time = self.sim.now
        self.send_much()

    # -- transmission -------------------------------------------------------

    def send_much(self):
        while self.snd_nxt - self.snd_una < self.window():
            self.send_segment(self.snd_nxt)
            self.snd_nxt += 1

    def send_segment(self, seq):
        now = self.sim.now
        seg = TcpSegment(self.flow, seqno=seq, sent_at=now, size=self.mss)
        packet = Packet(DATA, self.node.id, self.dst, seg,
                        self.mss + IP_HEADER + TCP_HEADER)
        first = seq > self.max_sent
        if first:
            self.max_sent = seq
        self.sent_time[seq] = now
        self.tx_count[seq] = self.tx_count.get(seq, 0) + 1
        self.node.metrics.data_sent(self.flow, seq, now, first)
        self.log("send", seq)
        self.arm_timer()
        self.node.routing.send(packet)

    def retransmit(self, seq, why):
        self.trace("rtx", f"seq={seq} why={why} cwnd={self.state.cwnd:.2f}")
        self.send_segment(seq)

    # -- retransmission timer -----------------------------------------------

    def arm_timer(self, restart=False):
        if self.deadline is None or restart:
            self.deadline = self.sim.now + self.state.rto
        if self.timer is None:
            self.timer = self.sim.schedule(self.deadline, self._timer_fired,
                                           target=self.node.id, action="TimerExpiry:rto")

    def _timer_fired(self):
        self.timer = None
        if self.deadline is None:
            return
        if self.sim.now < self.deadline:
            self.timer = self.sim.schedule(self.deadline, self._timer_fired,
                                           target=self.node.id, action="TimerExpiry:rto")
            return
        self.deadline = None
        self.on_timeout()

    def on_timeout(self):
        if self.outstanding() <= 0:
            return
        s = self.state
        self.timeouts += 1
        self.backoffs += 1
        if self.backoffs > self.cfg.max_backoffs:
            self.trace("reset", f"backoffs={self.backoffs}")
            self.resets += 1
            self.backoffs = 0
            s.rto = seconds(self.cfg.rto_init_s)
            s.ssthresh = float(self.cfg.init_ssthresh)
        else:
            s.ssthresh = self.timeout_ssthresh()
            s.rto = min(s.rto * 2, self.rto_max)
        s.cwnd = 1.0
        s.dupacks = 0
        s.in_recovery = False
        self.trace("timeout", f"una={self.snd_una} ssthresh={s.ssthresh:.2f} rto={s.rto}")
        self.log("timeout", self.snd_una)
        self.snd_nxt = self.snd_una
        self.on_timeout_hook()
        self.send_much()
        self.arm_timer(restart=True)

    def timeout_ssthresh(self):
        return max(self.state.cwnd / 2, 2.0)

    def on_timeout_hook(self):
        pass

    # -- ack processing -----------------------------------------------------

    def on_ack(self, seg):
        now = self.sim.now
        s = self.state
        if seg.ack_no >= self.snd_una:
            newly = seg.ack_no + 1 - self.snd_una
            for seq in range(self.snd_una, seg.ack_no + 1):
                self.sent_time.pop(seq, None)
            self.snd_una = seg.ack_no + 1
            if self.snd_nxt < self.snd_una:
                self.snd_nxt = self.snd_una
            if seg.ts_echo >= 0:
                self.rtt_sample(now - seg.ts_echo)
            self.bandwidth_sample(newly, now)
            self.backoffs = 0
            self.last_progress = now
            self.on_new_ack(seg, newly)
            if self.outstanding() > 0:
                self.arm_timer(restart=True)
            else:
                self.deadline = None
        else:
            s.dupacks += 1
            self.on_dupack(seg)
        if seg.miss_seqno:
            self.on_pack_notification(seg.miss_seqno, seg.num_miss_seqno)
        self.log("ack", seg.ack_no)
        self.send_much()

    def rtt_sample(self, rtt):
        s = self.state
        if s.srtt == 0:
            s.srtt = float(rtt)
            s.rttvar = rtt / 2.0
        else:
            s.rttvar = 0.75 * s.rttvar + 0.25 * abs(s.srtt - rtt)
            s.srtt = 0.875 * s.srtt + 0.125 * rtt
        s.rto = int(min(max(s.srtt + 4 * s.rttvar, self.rto_min), self.rto_max))
        if s.base_rtt == 0 or rtt < s.base_rtt:
            s.base_rtt = float(rtt)
        if s.rtt_min == 0 or rtt < s.rtt_min:
            s.rtt_min = float(rtt)

    def bandwidth_sample(self, newly, now):
        pass

    def grow(self):
        s = self.state
        if s.cwnd < s.ssthresh:
            s.cwnd += 1.0
        else:
            s.cwnd += 1.0 / s.cwnd

    def on_new_ack(self, seg, newly):
        self.state.dupacks = 0
        self.grow()

    def on_dupack(self, seg):
        if self.state.dupacks == 3:
            self.fast_retransmit()

    def fast_retransmit(self):
        s = self.state
        self.fast_retransmits += 1
        s.ssthresh = max(s.cwnd / 2, 2.0)
        s.cwnd = 1.0
        self.log("fastrtx", self.snd_una)
        self.snd_nxt = self.snd_una
        self.send_much()
        self.arm_timer(restart=True)

    def pack_covered(self, seq):
        return self.pack_rtx_until.get(seq, 0) > self.sim.now

    # -- PACK ---------------------------------------------------------------

    def on_pack_notification(self, miss_seqno, num_miss_seqno):
        """Retransmit still-unacked segments reported missing by the proxy.

        Window state is left alone; a segment already retransmitted for an
        earlier notification within one RTO is not sent again.
        """
        now = self.sim.now
        sent = 0
        for seq in range(miss_seqno, miss_seqno + num_miss_seqno):
            if seq < self.snd_una or seq >= self.snd_nxt or self.pack_covered(seq):
                continue
            self.pack_rtx_until[seq] = now + self.state.rto
            self.pack_retransmits += 1
            self.retransmit(seq, "pack")
            sent += 1
        if sent:
            self.arm_timer(restart=True)
        return sent


class TahoeSender(TcpSender):
    variant = "tahoe"


class RenoSender(TcpSender):
    variant = "reno"

    def on_new_ack(self, seg, newly):
        s = self.state
        s.dupacks = 0
        if s.in_recovery:
            s.in_recovery = False
            s.cwnd = s.ssthresh
            return
        self.grow()

    def on_dupack(self, seg):
        s = self.state
        if s.in_recovery:
            s.cwnd += 1.0
        elif s.dupacks == 3:
            self.fast_retransmit()

    def enter_recovery_ssthresh(self):
        return max(self.state.cwnd / 2, 2.0)

    def fast_retransmit(self):
        s = self.state
        self.fast_retransmits += 1
        s.ssthresh = self.enter_recovery_ssthresh()
        s.cwnd = self.recovery_cwnd()
        s.in_recovery = True
        s.recover = self.snd_nxt - 1
        self.log("fastrtx", self.snd_una)
        if not self.pack_covered(self.snd_una):
            self.retransmit(self.snd_una, "dupack")
        self.arm_timer(restart=True)

    def recovery_cwnd(self):
        return self.state.ssthresh + 3


class NewRenoSender(RenoSender):
    variant = "newreno"

    def on_new_ack(self, seg, newly):
        s = self.state
        if not s.in_recovery:
            s.dupacks = 0
            self.grow()
            return
        if seg.ack_no >= s.recover:
            s.in_recovery = False
            s.dupacks = 0
            s.cwnd = s.ssthresh
            return
        # partial ack: next hole, stay in recovery
        s.cwnd = max(s.cwnd - newly + 1, 1.0)
        if not self.pack_covered(seg.ack_no + 1):
            self.retransmit(seg.ack_no + 1, "partial")

    def on_dupack(self, seg):
        s = self.state
        if s.in_recovery:
            s.cwnd += 1.0
        elif s.dupacks == 3:
            self.fast_retransmit()


class VegasSender(RenoSender):
    """Reno loss recovery plus delay-based congestion avoidance and the
    fine-grained timeout check on the first two duplicate acks."""

    variant = "vegas"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.marker = 1
        self.vegas_log = []

    def fine_timeout(self):
        s = self.state
        if s.srtt == 0:
            return self.state.rto
        return s.srtt + 4 * s.rttvar

    def on_new_ack(self, seg, newly):
        s = self.state
        s.dupacks = 0
        if s.in_recovery:
            s.in_recovery = False
            s.cwnd = s.ssthresh
            self.marker = self.snd_nxt
            return
        if s.cwnd < s.ssthresh:
            s.cwnd += 1.0
        if seg.ack_no >= self.marker:
            self.marker = self.snd_nxt
            self.per_rtt_update()

    def per_rtt_update(self):
        s = self.state
        if s.base_rtt <= 0 or s.srtt <= 0:
            return
        cfg = self.cfg
        new, diff, s.expected_rate, s.actual_rate = vegas_window_update(
            s.cwnd, s.base_rtt, s.srtt, cfg.vegas_alpha, cfg.vegas_beta)
        self.vegas_log.append((self.sim.now, s.cwnd, diff))
        if s.cwnd < s.ssthresh:
            if diff > cfg.vegas_gamma:
                s.ssthresh = max(min(s.ssthresh, s.cwnd - 1), 2.0)
            return
        s.cwnd = max(new, 2.0)

    def on_dupack(self, seg):
        s = self.state
        if s.in_recovery:
            s.cwnd += 1.0
            return
        if s.dupacks == 3:
            self.fast_retransmit()
            return
        sent = self.sent_time.get(self.snd_una)
        if sent is not None and self.sim.now - sent > self.fine_timeout():
            self.trace("vegas-early", f"dupacks={s.dupacks}")
            self.fast_retransmit()


class WestwoodSender(NewRenoSender):
    variant = "westwood"

    def bandwidth_sample(self, newly, now):
        s = self.state
        dt = now - self.last_ack_time
        self.last_ack_time = now
        if dt <= 0:
            return
        sample = newly * self.mss / (dt / NS_PER_S)
        s.bwe = westwood_filter(s.bwe, sample, self.cfg.ww_filter_gain)

    def estimate(self):
        s = self.state
        if s.bwe <= 0 or s.rtt_min <= 0:
            return None
        return westwood_ssthresh(s.bwe, s.rtt_min / NS_PER_S, self.mss)

    def enter_recovery_ssthresh(self):
        est = self.estimate()
        return est if est is not None else max(self.state.cwnd / 2, 2.0)

    def recovery_cwnd(self):
        return min(self.state.cwnd, self.state.ssthresh)

    def timeout_ssthresh(self):
        est = self.estimate()
        return est if est is not None else max(self.state.cwnd / 2, 2.0)


SENDERS = {
    "tahoe": TahoeSender,
    "reno": RenoSender,
    "newreno": NewRenoSender,
    "vegas": VegasSender,
    "westwood": WestwoodSender,
}


def make_sender(variant, *args, **kwargs):
    try:
        cls = SENDERS[variant]
    except KeyError:
        raise ValueError(f"unknown TCP variant {variant!r}; expected one of {VARIANTS}")
    return cls(*args, **kwargs)


class TcpReceiver:
    """Acks every segment; delivers in order to the application exactly once."""

    def __init__(self, node, flow, src):
        self.node = node
        self.flow = flow
        self.src = src
        self.rcv_next = 1
        self.ooo = set()
        self.duplicates = 0

    def on_data(self, seg):
        seq = seg.seqno
        metrics = self.node.metrics
        now = self.node.sim.now
        # a buffered out-of-order copy stays counted as in flight until delivered
        if seq == self.rcv_next:
            metrics.app_deliver(self.flow, seq, now)
            metrics.copy_gone(self.flow, seq)
            self.rcv_next += 1
            while self.rcv_next in self.ooo:
                self.ooo.discard(self.rcv_next)
                metrics.app_deliver(self.flow, self.rcv_next, now)
                metrics.copy_gone(self.flow, self.rcv_next)
                self.rcv_next += 1
        elif seq > self.rcv_next and seq not in self.ooo:
            self.ooo.add(seq)
        else:
            self.duplicates += 1
            metrics.copy_gone(self.flow, seq)
        ack = TcpSegment(self.flow, seqno=0, ack_no=self.rcv_next - 1, is_ack=True,
                         ts_echo=seg.sent_at, size=0)
        self.node.routing.send(Packet(ACK, self.node.id, self.src, ack,
                                      IP_HEADER + TCP_HEADER))
        return ack
