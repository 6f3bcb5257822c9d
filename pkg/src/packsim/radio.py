"""Shared channel and a lossy, retrying CSMA MAC.

Every node within range of a sender records the reception interval.  A
frame is decoded at a receiver only if no other interval at that receiver
(including the receiver's own transmissions) overlaps it.  Unicast frames
get an implicit MAC ack and up to ``mac_retries`` retransmissions; running
out of retries is reported to routing as a link break.
"""
from collections import deque
from dataclasses import dataclass

from .engine import seconds
from .packet import BROADCAST, Frame

# intervals older than this cannot overlap anything still on the air
HORIZON = 20_000_000


@dataclass
class MacConfig:
    link_rate_bps: float = 2_000_000.0
    basic_rate_bps: float = 1_000_000.0
    mac_header_bytes: int = 52
    plcp_s: float = 192e-6
    slot_s: float = 20e-6
    sifs_s: float = 10e-6
    difs_s: float = 50e-6
    cw_min: int = 31
    cw_max: int = 1023
    mac_retries: int = 4
    ifq_len: int = 50

    def __post_init__(self):
        self.plcp = seconds(self.plcp_s)
        self.slot = seconds(self.slot_s)
        self.sifs = seconds(self.sifs_s)
        self.difs = seconds(self.difs_s)
        self.ack_time = self.sifs + self.plcp + seconds(14 * 8 / self.basic_rate_bps)

    def airtime(self, size_bytes):
        return self.plcp + int(round((size_bytes + self.mac_header_bytes) * 8
                                     / self.link_rate_bps * 1e9))


class RadioStats:
    def __init__(self):
        self.frames_sent = 0
        self.rx_attempts = 0
        self.rx_delivered = 0
        self.rx_collided = 0
        self.rx_filtered = 0
        self.retransmissions = 0
        self.link_failures = 0
        self.ifq_drops = 0


class Channel:
    def __init__(self, sim, topology, config):
        self.sim = sim
        self.topology = topology
        self.config = config
        self.stats = RadioStats()
        n = len(topology)
        self.rx = [deque() for _ in range(n)]
        # carrier-sense intervals; shared with ``rx`` when both ranges agree
        self.sensing = topology.cs_range_m > topology.range_m
        self.busy = [deque() for _ in range(n)] if self.sensing else self.rx
        self._fid = 0

    def busy_until(self, node, now):
        """End of the latest sensed interval covering ``now`` at ``node`` (0 if idle)."""
        until = 0
        for start, end, _ in self.busy[node]:
            if start <= now < end and end > until:
                until = end
        return until

    @staticmethod
    def _push(lst, iv, cutoff):
        while lst and lst[0][1] <= cutoff:
            lst.popleft()
        lst.append(iv)

    def transmit(self, frame):
        """Put ``frame`` on the air; returns ``(fire_at, receivers)``."""
        now = self.sim.now
        self._fid += 1
        fid = self._fid
        src = frame.src_mac
        frame.tx_start = now
        end = now + frame.airtime
        cutoff = now - HORIZON
        push = self._push
        rx = self.rx
        # own interval: half duplex, and the sender's medium is busy
        push(rx[src], (now, end, fid), cutoff)
        if self.sensing:
            busy = self.busy
            push(busy[src], (now, end, fid), cutoff)
            for nbr, prop in self.topology.sensers(src, now):
                push(busy[nbr], (now + prop, end + prop, fid), cutoff)
        receivers = []
        max_prop = 0
        for nbr, prop in self.topology.neighbors(src, now):
            iv = (now + prop, end + prop, fid)
            lst = rx[nbr]
            while lst and lst[0][1] <= cutoff:
                lst.popleft()
            lst.append(iv)
            receivers.append((nbr, iv))
            if prop > max_prop:
                max_prop = prop
        self.stats.frames_sent += 1
        return end + max_prop, receivers

    def clean(self, node, iv):
        start, end, fid = iv
        for s, e, f in self.rx[node]:
            if s < end and e > start and f != fid:
                return False
        return True


class Mac:
    """Per-node interface queue plus contention and retry logic."""

    def __init__(self, node_id, sim, channel, rng, on_receive, on_link_failure, on_drop):
        self.id = node_id
        self.sim = sim
        self.channel = channel
        self.cfg = channel.config
        self.rng = rng
        self.on_receive = on_receive
        self.on_link_failure = on_link_failure
        self.on_drop = on_drop
        self.queue = deque()
        self.current = None
        self.pending = None
        self.transmitting = False

    def __len__(self):
        return len(self.queue) + (self.current is not None)

    def enqueue(self, packet, next_hop, priority=False):
        if len(self.queue) >= self.cfg.ifq_len:
            if not priority:
                self.channel.stats.ifq_drops += 1
                self.on_drop(packet, "IFQ")
                return False
            # control traffic displaces the newest data packet
            victim = self._evict_data()
            if victim is None:
                self.channel.stats.ifq_drops += 1
                self.on_drop(packet, "IFQ")
                return False
        frame = Frame(self.id, next_hop, packet)
        if priority:
            self.queue.appendleft(frame)
        else:
            self.queue.append(frame)
        if self.current is None:
            self._next()
        return True

    def _evict_data(self):
        for i in range(len(self.queue) - 1, -1, -1):
            f = self.queue[i]
            if not f.payload.is_control:
                del self.queue[i]
                self.channel.stats.ifq_drops += 1
                self.on_drop(f.payload, "IFQ")
                return f
        return None

    def purge(self, next_hop):
        """Remove and return queued packets addressed to ``next_hop``."""
        keep, gone = deque(), []
        for f in self.queue:
            if f.dst_mac == next_hop:
                gone.append(f.payload)
            else:
                keep.append(f)
        self.queue = keep
        return gone

    def _backoff(self, retries):
        cw = min((self.cfg.cw_min + 1) * (1 << retries) - 1, self.cfg.cw_max)
        return self.cfg.difs + self.rng.randint(0, cw) * self.cfg.slot

    def _next(self, delay=0):
        if not self.queue:
            self.current = None
            return
        self.current = self.queue.popleft()
        self.current.airtime = self.cfg.airtime(self.current.payload.size)
        self.pending = self.sim.schedule(self.sim.now + delay + self._backoff(0),
                                         self._attempt, target=self.id, action="MacAttempt")

    def _attempt(self):
        frame = self.current
        now = self.sim.now
        busy = self.channel.busy_until(self.id, now)
        if busy > now:
            self.pending = self.sim.schedule(busy + self._backoff(frame.retries),
                                             self._attempt, target=self.id,
                                             action="MacAttempt")
            return
        fire_at, receivers = self.channel.transmit(frame)
        self.transmitting = True
        self.pending = self.sim.schedule(fire_at, self._tx_end, frame, receivers,
                                         target=self.id, action="FrameDelivery")

    def _tx_end(self, frame, receivers):
        self.transmitting = False
        ch = self.channel
        st = ch.stats
        dst = frame.dst_mac
        delivered_to_dst = False
        st.rx_attempts += len(receivers)
        nodes = ch.nodes
        for nbr, iv in receivers:
            # overheard unicast is filtered by address before decoding
            if dst != BROADCAST and nbr != dst:
                st.rx_filtered += 1
                continue
            if not ch.clean(nbr, iv):
                st.rx_collided += 1
                continue
            st.rx_delivered += 1
            if nbr == dst:
                delivered_to_dst = True
            nodes[nbr].receive(frame.payload, frame.src_mac)
        if dst == BROADCAST or delivered_to_dst:
            self._next(self.cfg.ack_time if dst != BROADCAST else 0)
            return
        frame.retries += 1
        if frame.retries > self.cfg.mac_retries:
            st.link_failures += 1
            self.current = None
            self.on_link_failure(frame.payload, dst)
            if self.current is None:
                self._next()
            return
        st.retransmissions += 1
        self.pending = self.sim.schedule(self.sim.now + self.cfg.ack_time
                                         + self._backoff(frame.retries),
                                         self._attempt, target=self.id, action="MacAttempt")
