"""Bulk-transfer flows and the four run metrics: throughput, packet loss
rate, average end-to-end delay and routing overhead.

Loss is counted over unique segment numbers: a segment that reaches the
application after retransmission is not lost.  Overhead counts every
control packet handed to the MAC, once per hop.
"""
from collections import Counter
from dataclasses import dataclass, field

from .engine import NS_PER_S

@dataclass
class FtpFlow:
    flow: int
    src: int
    dst: int
    start_at: int


@dataclass
class FlowStats:
    flow: FtpFlow
    first_sent: dict = field(default_factory=dict)
    copies: Counter = field(default_factory=Counter)
    transmissions: int = 0
    unique_sent: int = 0
    delivered: int = 0
    delivered_bytes: int = 0
    delay_sum: float = 0.0
    delay_count: int = 0
    app_log: list = None
    order_errors: int = 0


class MetricsAccumulator:
    def __init__(self, mss_bytes=1000, keep_app_log=True):
        self.mss = mss_bytes
        self.keep_app_log = keep_app_log
        self.flows = {}
        self.control = Counter()
        self.data_frames_sent = 0
        self.drops = Counter()
        self.packs = []
        self.pack_dropped = 0

    def add_flow(self, flow):
        st = FlowStats(flow)
        if self.keep_app_log:
            st.app_log = []
        self.flows[flow.flow] = st
        return st

    # -- hooks called from the simulation --------------------------------------

    def data_sent(self, flow, seq, now, first):
        st = self.flows[flow]
        st.transmissions += 1
        st.copies[seq] += 1
        if first:
            st.first_sent[seq] = now
            st.unique_sent += 1

    def copy_gone(self, flow, seq):
        st = self.flows.get(flow)
        if st is not None and st.copies[seq] > 0:
            st.copies[seq] -= 1

    def dropped(self, packet, reason):
        self.drops[(packet.kind, reason)] += 1

    def app_deliver(self, flow, seq, now):
        st = self.flows[flow]
        if seq != st.delivered + 1:
            st.order_errors += 1
        st.delivered += 1
        st.delivered_bytes += self.mss
        st.delay_sum += now - st.first_sent[seq]
        st.delay_count += 1
        if st.app_log is not None:
            st.app_log.append(seq)

    def control_sent(self, kind):
        self.control[kind] += 1

    def pack_emitted(self, flow, first, count):
        self.packs.append((flow, first, count))

    # -- results ------------------------------------------------------------

    def throughput(self, t_end, flow=None):
        """Bits per second, per flow or summed over all flows."""
        if flow is None:
            vals = [self.throughput(t_end, f) for f in self.flows]
            vals = [v for v in vals if v is not None]
            return sum(vals)
        st = self.flows[flow]
        duration = t_end - st.flow.start_at
        if duration <= 0:
            return None
        return st.delivered_bytes * 8 / (duration / NS_PER_S)

    def in_flight(self, flow):
        st = self.flows[flow]
        return sum(1 for seq in range(st.delivered + 1, st.unique_sent + 1)
                   if st.copies[seq] > 0)

    def lost(self, flow):
        st = self.flows[flow]
        return sum(1 for seq in range(st.delivered + 1, st.unique_sent + 1)
                   if st.copies[seq] <= 0)

    def packet_loss_rate(self, flow=None):
        flows = [flow] if flow is not None else list(self.flows)
        sent = sum(self.flows[f].unique_sent for f in flows)
        if sent == 0:
            return 0.0
        return 100.0 * sum(self.lost(f) for f in flows) / sent

    def average_delay(self, flow=None):
        flows = [flow] if flow is not None else list(self.flows)
        n = sum(self.flows[f].delay_count for f in flows)
        if n == 0:
            return None
        return sum(self.flows[f].delay_sum for f in flows) / n / NS_PER_S

    def routing_overhead(self):
        return sum(self.control.values())

    def overhead_ratio(self):
        if self.data_frames_sent == 0:
            return None
        return self.routing_overhead() / self.data_frames_sent

    def audit(self):
        """Per-flow check that the application saw 1..n exactly once, in order."""
        problems = {}
        for f, st in self.flows.items():
            if st.order_errors:
                problems[f] = f"{st.order_errors} out-of-order deliveries"
            elif st.app_log is not None and st.app_log != list(range(1, st.delivered + 1)):
                problems[f] = "application log is not 1..n"
        return problems
