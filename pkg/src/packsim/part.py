"""Proxy-assisted routing (PART) with optional PACK.

On top of AODV: the destination asks for a proxy when the request crossed
more than ``min_allowable_hc`` hops, the RREP forwarder at ``phc`` hops from
the destination takes the proxy role, broken links are repaired locally with
a scoped request, and a proxy that sees too many errors in a short window
resets the connection at the source.
"""
import math
from collections import deque

from . import pack
from .aodv import AodvAgent, RouteEntry
from .engine import seconds
from .packet import ACK, DATA, RERR, RERR_SIZE, Packet, Rerr


def decide_proxy_use(hc, min_allowable_hc=3):
    return hc > min_allowable_hc


def compute_phc(hc, rounding="ceil"):
    if rounding == "ceil":
        return math.ceil(hc / 2)
    if rounding == "floor":
        return hc // 2
    raise ValueError(f"unknown phc rounding {rounding!r}")


class ProxyRole:
    """Proxy duty for one (source, destination) connection."""

    def __init__(self, connection, assigned_at, phc):
        self.connection = connection
        self.assigned_at = assigned_at
        self.phc = phc
        self.last_seen = assigned_at
        self.checkers = {}
        self.errors = deque()

    def checker(self, flow):
        state = self.checkers.get(flow)
        if state is None:
            state = pack.SeqCheckerState(connection=(self.connection, flow))
            self.checkers[flow] = state
        return state

    def record_error(self, now, window):
        self.errors.append(now)
        while self.errors and self.errors[0] < now - window:
            self.errors.popleft()
        return len(self.errors)


class PartAgent(AodvAgent):
    name = "part"

    def __init__(self, node, config, pack_enabled=False):
        super().__init__(node, config)
        self.pack_enabled = pack_enabled
        self.roles = {}
        self.role_log = []
        self._watch = {}

    # -- proxy selection ----------------------------------------------------

    def proxy_hop_count(self, hc):
        if decide_proxy_use(hc, self.cfg.min_allowable_hc):
            return compute_phc(hc, self.cfg.phc_rounding)
        return 0

    def on_rrep(self, rrep, hc, rt):
        if rrep.proxy >= 0:
            rt.now_proxy = rrep.proxy
        elif rrep.phc > 0:
            rt.now_proxy = -1

    def before_rrep_forward(self, rrep):
        if rrep.phc > 0 and rrep.hop_count == rrep.phc:
            self.assign_proxy(rrep)

    def assign_proxy(self, rrep):
        connection = (rrep.origin, rrep.dest)
        self.roles[connection] = ProxyRole(connection, self.sim.now, rrep.phc)
        rrep.proxy = self.id
        rt = self.table.get(rrep.dest)
        if rt is not None:
            rt.now_proxy = self.id
        self.role_log.append((self.sim.now, "assign", connection, rrep.hop_count))
        self.node.trace("PART", "proxy", f"conn={connection[0]}->{connection[1]} "
                                         f"phc={rrep.phc}")

    def resign(self, connection, why):
        if self.roles.pop(connection, None) is not None:
            self.role_log.append((self.sim.now, "resign:" + why, connection, 0))
            self.node.trace("PART", "resign", f"conn={connection[0]}->{connection[1]} {why}")

    def active_role(self, connection):
        role = self.roles.get(connection)
        if role is None:
            return None
        if self.sim.now - role.last_seen > seconds(self.cfg.proxy_idle_s):
            self.resign(connection, "idle")
            return None
        return role

    def stamp(self, packet, rt):
        packet.proxy = rt.now_proxy

    # -- data path ----------------------------------------------------------

    def forward(self, packet, from_mac):
        if packet.kind == DATA:
            conn = (packet.src, packet.dst)
            role = self.active_role(conn)
            if role is not None:
                if packet.proxy >= 0 and packet.proxy != self.id:
                    self.resign(conn, "superseded")
                else:
                    role.last_seen = self.sim.now
                    if self.pack_enabled:
                        self.check_data(role, packet)
        elif packet.kind == ACK and self.pack_enabled:
            pack.augment_ack(self, packet)
        super().forward(packet, from_mac)

    def check_data(self, role, packet):
        seg = packet.payload
        state = role.checker(seg.flow)
        out = pack.check_sequence(state, seg.seqno, self.id, self.sim.now)
        if out.kind == pack.MISSING:
            self.node.trace("PACK", "missing", f"flow={seg.flow} miss={out.first}/{out.count}")
            pack.send_pack(self, seg.flow, packet.src, out.first, out.count)
        return out

    def handle_pack(self, packet, from_mac):
        pack.handle_pack(self, packet, from_mac)

    def handle_ohpack(self, packet, from_mac):
        pack.handle_ohpack(self, packet, from_mac)

    def placeholder_route(self, dest):
        rt = RouteEntry(dest, -1, 0, 0, 0)
        rt.valid = False
        self.table[dest] = rt
        return rt

    # -- local repair -------------------------------------------------------

    def no_route(self, packet, from_mac):
        if packet.kind in (DATA, ACK):
            self.hold(packet)
            self.discover(packet.dst, repair=True)
            return
        super().no_route(packet, from_mac)

    def link_failed(self, packet, next_hop):
        self.node.trace("RTR", "linkfail", f"nh={next_hop} {packet.describe()}")
        self.invalidate_via(next_hop)
        stranded = [packet] + self.node.mac.purge(next_hop)
        dests = set()
        broken = set()
        for p in stranded:
            if p.kind not in (DATA, ACK):
                self.node.drop(p, "LINK")
                continue
            self.hold(p)
            dests.add(p.dst)
            if p.kind == DATA and p.src != self.id:
                broken.add((p.src, p.dst))
        # one break is one error per connection, however many packets it strands
        for conn in sorted(broken):
            self.proxy_error(conn)
        # sources repair locally too and fall back to a full discovery
        for dest in sorted(dests):
            self.discover(dest, repair=True)

    def repair_failed(self, dest):
        self.node.trace("PART", "repair-failed", f"dest={dest}")
        own = deque()
        for packet in self.buffer.pop(dest, ()):
            if packet.src == self.id:
                own.append(packet)
            else:
                self.node.drop(packet, "NRTE")
        rt = self.table.get(dest)
        if len(own) or self.node.has_active_flow_to(dest):
            if own:
                self.buffer[dest] = own
            self.discover(dest)
            return
        self.send_rerr(((dest, rt.dest_seq if rt else 0),))

    # -- proxy failure ------------------------------------------------------

    def proxy_error(self, connection):
        role = self.active_role(connection)
        if role is None:
            return
        n = role.record_error(self.sim.now, seconds(self.cfg.proxy_error_window_s))
        if n > self.cfg.proxy_error_threshold:
            self.send_reset(connection)
            self.resign(connection, "errors")

    def send_reset(self, connection):
        source, dest = connection
        rt = self.table.get(dest)
        rerr = Rerr(((dest, rt.dest_seq if rt else 0),), True, connection)
        back = self.route(source)
        next_hop = back.next_hop if back is not None else None
        if next_hop is None:
            for flow, up in self.node.upstream.items():
                if self.node.flow_ends.get(flow) == connection:
                    next_hop = up
        self.node.trace("PART", "reset", f"conn={source}->{dest}")
        if next_hop is None:
            return
        self.emit(Packet(RERR, self.id, source, rerr, RERR_SIZE), next_hop)

    def handle_rerr(self, packet, from_mac):
        rerr = packet.payload
        if rerr.reset_flag:
            source, dest = rerr.connection
            if source == self.id:
                self.node.trace("PART", "reset-recv", f"dest={dest}")
                rt = self.table.get(dest)
                if rt is not None:
                    rt.valid = False
                self.discoveries.pop(dest, None)
                self.discover(dest)
                return
            packet.ttl -= 1
            back = self.route(source)
            if back is None or packet.ttl <= 0:
                self.node.drop(packet, "NRTE")
                return
            self.emit(packet, back.next_hop)
            return
        for dest, _ in rerr.dests:
            for conn in [c for c in self.roles if c[1] == dest]:
                self.proxy_error(conn)
        super().handle_rerr(packet, from_mac)

    # -- source fallback ----------------------------------------------------

    def watch(self, sender):
        """Rediscover when a connection makes no progress for 2 x RTO."""
        self._watch[sender.flow] = sender
        self._arm(sender)

    def _arm(self, sender):
        self.sim.schedule(self.sim.now + 2 * sender.rto, self._fallback, sender,
                          target=self.id, action="TimerExpiry:fallback")

    def _fallback(self, sender):
        idle = self.sim.now - sender.last_progress
        if sender.outstanding() > 0 and idle >= 2 * sender.rto:
            rt = self.table.get(sender.dst)
            if rt is not None and rt.valid and sender.dst not in self.discoveries:
                self.node.trace("PART", "fallback", f"dest={sender.dst}")
                rt.valid = False
                self.discover(sender.dst)
            sender.last_progress = self.sim.now
        self._arm(sender)
