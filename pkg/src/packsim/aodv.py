"""On-demand distance-vector routing (AODV baseline).

Minimal feature set: RREQ flooding with duplicate suppression, RREP unicast
along the reverse path, RERR propagation on link breaks and monotone
per-node destination sequence numbers.  No hello messages, no gratuitous
replies.  Intermediate nodes answer only local-repair requests (PART).
"""
from collections import deque
from dataclasses import dataclass, replace

from .engine import seconds
from .packet import (ACK, BROADCAST, DATA, OHPACK, PACK, RERR, RERR_SIZE, RREP,
                     RREP_SIZE, RREQ, RREQ_SIZE, Packet, Rerr, Rrep, Rreq)


@dataclass
class RoutingConfig:
    rreq_retries: int = 3
    rreq_ttl: int = 35
    discovery_timeout_s: float = 1.0
    route_lifetime_s: float = 10.0
    rreq_jitter_s: float = 0.01
    send_buffer_len: int = 64
    data_ttl: int = 64
    # PART
    min_allowable_hc: int = 3
    phc_rounding: str = "ceil"
    repair_ttl: int = 1
    repair_timeout_s: float = 0.2
    repair_retries: int = 2
    proxy_error_window_s: float = 2.0
    proxy_error_threshold: int = 3
    proxy_idle_s: float = 10.0


class RouteEntry:
    __slots__ = ("dest", "next_hop", "hop_count", "dest_seq", "lifetime", "valid",
                 "now_proxy", "miss_seqno", "num_miss_seqno", "miss_flow")

    def __init__(self, dest, next_hop, hop_count, dest_seq, lifetime):
        self.dest = dest
        self.next_hop = next_hop
        self.hop_count = hop_count
        self.dest_seq = dest_seq
        self.lifetime = lifetime
        self.valid = True
        self.now_proxy = -1
        self.miss_seqno = 0
        self.num_miss_seqno = 0
        self.miss_flow = -1

    def usable(self, now):
        return self.valid and self.lifetime > now

    def __repr__(self):
        return (f"RouteEntry(dest={self.dest}, next_hop={self.next_hop}, "
                f"hops={self.hop_count}, seq={self.dest_seq}, valid={self.valid}, "
                f"proxy={self.now_proxy}, miss={self.miss_seqno}/{self.num_miss_seqno})")


class Discovery:
    __slots__ = ("dest", "attempt", "timer", "repair")

    def __init__(self, dest, repair=False):
        self.dest = dest
        self.attempt = 0
        self.timer = None
        self.repair = repair


class AodvAgent:
    name = "aodv"

    def __init__(self, node, config):
        self.node = node
        self.id = node.id
        self.sim = node.sim
        self.cfg = config
        self.lifetime = seconds(config.route_lifetime_s)
        self.table = {}
        self.seq = 0
        self.bid = 0
        self.seen = set()
        self.discoveries = {}
        self.buffer = {}

    # -- route table --------------------------------------------------------

    def route(self, dest):
        rt = self.table.get(dest)
        if rt is not None and rt.usable(self.sim.now):
            return rt
        return None

    def update_route(self, dest, next_hop, hop_count, dest_seq):
        """Install or refresh a route if the offer is fresher or shorter."""
        now = self.sim.now
        rt = self.table.get(dest)
        if rt is None:
            rt = RouteEntry(dest, next_hop, hop_count, dest_seq, now + self.lifetime)
            self.table[dest] = rt
            return rt
        usable = rt.usable(now)
        if (not usable or dest_seq > rt.dest_seq
                or (dest_seq == rt.dest_seq and hop_count < rt.hop_count)
                or rt.next_hop == next_hop):
            rt.next_hop = next_hop
            rt.hop_count = hop_count
            # a broken route's bumped seqno must not outrank the fresh offer
            rt.dest_seq = max(dest_seq, rt.dest_seq) if usable else dest_seq
            rt.valid = True
        rt.lifetime = max(rt.lifetime, now + self.lifetime)
        return rt

    def refresh(self, dest):
        rt = self.table.get(dest)
        if rt is not None and rt.valid:
            rt.lifetime = self.sim.now + self.lifetime

    def invalidate_via(self, next_hop):
        dests = []
        for rt in self.table.values():
            if rt.valid and rt.next_hop == next_hop:
                rt.valid = False
                rt.dest_seq += 1
                dests.append((rt.dest, rt.dest_seq))
        return dests

    # -- sending ------------------------------------------------------------

    def emit(self, packet, next_hop):
        """Hand a packet to the MAC; control packets are counted as overhead."""
        node = self.node
        if packet.kind not in (DATA, ACK):
            node.metrics.control_sent(packet.kind)
            if node.tracer.enabled:
                node.trace("RTR", "send", packet.describe())
            return node.mac.enqueue(packet, next_hop, priority=True)
        node.metrics.data_frames_sent += 1
        return node.mac.enqueue(packet, next_hop)

    def send(self, packet):
        """Entry point for transport-originated packets."""
        rt = self.route(packet.dst)
        if rt is not None:
            self.stamp(packet, rt)
            self.refresh(packet.dst)
            self.emit(packet, rt.next_hop)
            return
        self.hold(packet)
        self.discover(packet.dst)

    def stamp(self, packet, rt):
        pass

    def hold(self, packet):
        q = self.buffer.setdefault(packet.dst, deque())
        if len(q) >= self.cfg.send_buffer_len:
            self.node.drop(packet, "SBUF")
            return
        q.append(packet)

    def flush(self, dest):
        q = self.buffer.pop(dest, None)
        if not q:
            return
        rt = self.route(dest)
        for packet in q:
            if rt is None:
                self.node.drop(packet, "NRTE")
                continue
            if packet.src == self.id:
                self.stamp(packet, rt)
            self.emit(packet, rt.next_hop)

    # -- discovery ----------------------------------------------------------

    def discover(self, dest, repair=False, ttl=None):
        if dest in self.discoveries:
            return
        d = Discovery(dest, repair)
        self.discoveries[dest] = d
        self._send_rreq(d, ttl)

    def _send_rreq(self, d, ttl=None):
        self.bid += 1
        self.seq += 1
        known = self.table.get(d.dest)
        rreq = Rreq(self.id, d.dest, self.bid, 0, self.seq,
                    known.dest_seq if known else 0, d.repair,
                    known.hop_count if d.repair and known else 0)
        self.seen.add((self.id, self.bid))
        if ttl is None:
            if d.repair:
                # expanding ring: one-hop neighbours first
                ttl = 1 if d.attempt == 0 else self.cfg.repair_ttl
            else:
                ttl = self.cfg.rreq_ttl
        self.emit(Packet(RREQ, self.id, BROADCAST, rreq, RREQ_SIZE, ttl=ttl), BROADCAST)
        timeout = seconds(self.cfg.discovery_timeout_s) * (1 << d.attempt)
        if d.repair:
            timeout = seconds(self.cfg.repair_timeout_s)
        d.timer = self.sim.schedule(self.sim.now + timeout, self._discovery_timeout, d,
                                    target=self.id, action="TimerExpiry:rreq")

    def _discovery_timeout(self, d):
        if self.discoveries.get(d.dest) is not d:
            return
        if self.route(d.dest) is not None:
            del self.discoveries[d.dest]
            self.flush(d.dest)
            return
        d.attempt += 1
        if d.repair and d.attempt > self.cfg.repair_retries:
            del self.discoveries[d.dest]
            self.repair_failed(d.dest)
            return
        if d.attempt > self.cfg.rreq_retries:
            del self.discoveries[d.dest]
            self.node.trace("RTR", "noroute", f"dest={d.dest}")
            for packet in self.buffer.pop(d.dest, ()):
                self.node.drop(packet, "NRTE")
            return
        self._send_rreq(d)

    def _discovery_done(self, dest):
        d = self.discoveries.pop(dest, None)
        if d is not None:
            self.sim.cancel(d.timer)
        self.flush(dest)

    def repair_failed(self, dest):
        pass

    # -- receiving ----------------------------------------------------------

    def recv(self, packet, from_mac):
        kind = packet.kind
        if kind == DATA or kind == ACK:
            self.recv_transport(packet, from_mac)
        elif kind == RREQ:
            self.handle_rreq(packet, from_mac)
        elif kind == RREP:
            self.handle_rrep(packet, from_mac)
        elif kind == RERR:
            self.handle_rerr(packet, from_mac)
        elif kind == PACK:
            self.handle_pack(packet, from_mac)
        elif kind == OHPACK:
            self.handle_ohpack(packet, from_mac)

    def recv_transport(self, packet, from_mac):
        if packet.kind == DATA:
            self.node.upstream[packet.payload.flow] = from_mac
        if packet.dst == self.id:
            self.refresh(packet.src)
            self.node.deliver_local(packet)
            return
        packet.ttl -= 1
        packet.hops += 1
        if packet.ttl <= 0:
            self.node.drop(packet, "TTL")
            return
        self.forward(packet, from_mac)

    def forward(self, packet, from_mac):
        rt = self.route(packet.dst)
        if rt is None:
            self.no_route(packet, from_mac)
            return
        self.refresh(packet.dst)
        self.refresh(packet.src)
        self.emit(packet, rt.next_hop)

    def no_route(self, packet, from_mac):
        self.node.drop(packet, "NRTE")
        rt = self.table.get(packet.dst)
        seq = rt.dest_seq if rt else 0
        self.send_rerr(((packet.dst, seq),))

    def send_rerr(self, dests, reset=False, connection=None):
        rerr = Rerr(tuple(dests), reset, connection)
        self.emit(Packet(RERR, self.id, BROADCAST, rerr, RERR_SIZE, ttl=1), BROADCAST)

    def handle_rreq(self, packet, from_mac):
        rreq = packet.payload
        key = (rreq.origin, rreq.bid)
        if key in self.seen or rreq.origin == self.id:
            return
        self.seen.add(key)
        hc = rreq.hop_count + 1
        self.update_route(from_mac, from_mac, 1, self.table[from_mac].dest_seq
                          if from_mac in self.table else 0)
        self.update_route(rreq.origin, from_mac, hc, rreq.origin_seq)
        if rreq.dest == self.id:
            self.seq = max(self.seq, rreq.dest_seq) + 1
            rrep = Rrep(rreq.origin, self.id, 0, self.seq, self.proxy_hop_count(hc))
            self.node.trace("RTR", "rreq-dest", f"origin={rreq.origin} hc={hc}")
            self.emit(Packet(RREP, self.id, rreq.origin, rrep, RREP_SIZE), from_mac)
            return
        if rreq.repair:
            rt = self.route(rreq.dest)
            if (rt is not None and rt.next_hop != from_mac and rreq.bound
                    and rt.hop_count < rreq.bound):
                rrep = Rrep(rreq.origin, rreq.dest, rt.hop_count, rt.dest_seq, 0)
                self.emit(Packet(RREP, self.id, rreq.origin, rrep, RREP_SIZE), from_mac)
                return
        if packet.ttl <= 1:
            return
        fwd = replace(packet, payload=replace(rreq, hop_count=hc), ttl=packet.ttl - 1,
                      hops=packet.hops + 1)
        jitter = int(self.node.rng.uniform(0, self.cfg.rreq_jitter_s) * 1e9)
        self.sim.schedule(self.sim.now + jitter, self.emit, fwd, BROADCAST,
                          target=self.id, action="TimerExpiry:jitter")

    def proxy_hop_count(self, hc):
        return 0

    def handle_rrep(self, packet, from_mac):
        rrep = packet.payload
        hc = rrep.hop_count + 1
        rt = self.update_route(rrep.dest, from_mac, hc, rrep.dest_seq)
        self.on_rrep(rrep, hc, rt)
        if rrep.origin == self.id:
            self.node.trace("RTR", "route", f"dest={rrep.dest} hops={hc} via={from_mac}")
            self._discovery_done(rrep.dest)
            return
        back = self.route(rrep.origin)
        if back is None or packet.ttl <= 1:
            return
        fwd = replace(packet, payload=replace(rrep, hop_count=hc), ttl=packet.ttl - 1,
                      hops=packet.hops + 1)
        self.before_rrep_forward(fwd.payload)
        self.emit(fwd, back.next_hop)

    def on_rrep(self, rrep, hc, rt):
        pass

    def before_rrep_forward(self, rrep):
        pass

    def handle_rerr(self, packet, from_mac):
        rerr = packet.payload
        broken = []
        for dest, seq in rerr.dests:
            rt = self.table.get(dest)
            if rt is not None and rt.valid and rt.next_hop == from_mac:
                rt.valid = False
                rt.dest_seq = max(rt.dest_seq, seq)
                broken.append((dest, rt.dest_seq))
        if not broken:
            return
        self.node.trace("RTR", "rerr", " ".join(f"{d}" for d, _ in broken))
        self.send_rerr(broken)
        for dest, _ in broken:
            self.route_lost(dest)

    def route_lost(self, dest):
        if self.node.has_active_flow_to(dest):
            self.discover(dest)

    def handle_pack(self, packet, from_mac):
        pass

    def handle_ohpack(self, packet, from_mac):
        pass

    # -- link layer feedback ------------------------------------------------

    def link_failed(self, packet, next_hop):
        """MAC gave up on ``packet`` after exhausting retries."""
        self.node.trace("RTR", "linkfail", f"nh={next_hop} {packet.describe()}")
        broken = self.invalidate_via(next_hop)
        stranded = [packet] + self.node.mac.purge(next_hop)
        for p in stranded:
            if p.kind in (DATA, ACK) and p.src == self.id:
                self.hold(p)
            else:
                self.node.drop(p, "LINK")
        if broken:
            self.send_rerr(broken)
        for dest, _ in broken:
            self.route_lost(dest)
        for dest in list(self.buffer):
            if self.route(dest) is None:
                self.discover(dest)
