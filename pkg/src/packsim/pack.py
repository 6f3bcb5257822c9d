"""Proxy acknowledgement: sequence checking at the proxy and the PACK/OHPACK
notifications that carry the first missing segment and gap length back to
the TCP source.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

from .packet import ACK, BROADCAST, OHPACK, PACK, PACK_SIZE, Packet, PackPacket

IN_ORDER = "InOrder"
MISSING = "Missing"
RETRANSMISSION = "RetransmissionSeen"
PROXY_CHANGED = "ProxyChanged"


class Outcome(NamedTuple):
    kind: str
    first: int = 0
    count: int = 0


class NotProxyError(RuntimeError):
    pass


@dataclass
class SeqCheckerState:
    connection: object
    exp_seqno: int = 0
    now_proxy: int = -1
    is_proxy: bool = True
    miss_log: list = field(default_factory=list)


def check_sequence(state, cur_seqno, observing_proxy, now=0):
    """Compare one observed data seqno against the linearly advancing expectation.

    Returns an :class:`Outcome`.  ``exp_seqno`` is the last expected value;
    each arrival first advances it by one and then compares.
    """
    if not state.is_proxy:
        raise NotProxyError(f"node {observing_proxy} holds no proxy role for "
                            f"{state.connection}")
    if cur_seqno == 1:
        # first segment of the connection; a later retransmitted 1 falls
        # through to the retransmission branch because exp_seqno > 0
        state.now_proxy = observing_proxy
    elif observing_proxy != state.now_proxy:
        state.now_proxy = observing_proxy
        state.exp_seqno = cur_seqno
        return Outcome(PROXY_CHANGED)

    expected = state.exp_seqno + 1
    if cur_seqno == expected:
        state.exp_seqno = expected
        return Outcome(IN_ORDER)
    if cur_seqno > expected:
        count = cur_seqno - expected
        state.exp_seqno = cur_seqno
        state.miss_log.append((expected, count, now))
        return Outcome(MISSING, expected, count)
    # retransmission: the increment is taken back, then max(cur, exp)
    state.exp_seqno = max(cur_seqno, state.exp_seqno)
    return Outcome(RETRANSMISSION)


def oracle_gaps(stream):
    """Brute-force gap reports for a fixed proxy: set difference against max seen."""
    seen = set()
    max_seen = 0
    gaps = []
    for s in stream:
        if s > max_seen + 1:
            hole = set(range(max_seen + 1, s)) - seen
            gaps.append((min(hole), len(hole)))
        seen.add(s)
        max_seen = max(max_seen, s)
    return gaps


# -- routing-layer handling ---------------------------------------------------

def record_miss(agent, source, flow, miss_seqno, num_miss_seqno):
    """Store the newest miss information in the entry toward ``source``."""
    rt = agent.table.get(source)
    if rt is None:
        rt = agent.placeholder_route(source)
    rt.miss_seqno = miss_seqno
    rt.num_miss_seqno = num_miss_seqno
    rt.miss_flow = flow
    return rt


def send_pack(agent, flow, source, first, count):
    """Unicast a PACK toward ``source`` via the MAC-observed upstream node and
    broadcast an OHPACK to the proxy's one-hop neighbours."""
    node = agent.node
    upstream = node.upstream.get(flow)
    if upstream is None:
        node.trace("PACK", "suppressed", f"flow={flow} miss={first}/{count}")
        return False
    rt = record_miss(agent, source, flow, first, count)
    rt.next_hop = upstream
    if not rt.valid:
        rt.valid = True
        rt.hop_count = max(rt.hop_count, 1)
        rt.lifetime = agent.sim.now + agent.lifetime
    info = PackPacket(flow, first, count, source, agent.id)
    agent.emit(Packet(PACK, agent.id, source, info, PACK_SIZE), upstream)
    oh = PackPacket(flow, first, count, source, agent.id)
    agent.emit(Packet(OHPACK, agent.id, BROADCAST, oh, PACK_SIZE, ttl=1), BROADCAST)
    node.metrics.pack_emitted(flow, first, count)
    return True


def handle_pack(agent, packet, from_mac):
    info = packet.payload
    node = agent.node
    record_miss(agent, info.toward, info.flow, info.miss_seqno, info.num_miss_seqno)
    if info.toward == agent.id:
        node.trace("PACK", "recv", f"flow={info.flow} miss={info.miss_seqno}/"
                                   f"{info.num_miss_seqno}")
        node.pack_notify(info.flow, info.miss_seqno, info.num_miss_seqno)
        return
    packet.ttl -= 1
    if packet.ttl <= 0:
        node.drop(packet, "TTL")
        return
    rt = agent.route(info.toward)
    next_hop = rt.next_hop if rt is not None else node.upstream.get(info.flow)
    if next_hop is None:
        node.metrics.pack_dropped += 1
        node.drop(packet, "NRTE")
        return
    agent.emit(packet, next_hop)


def handle_ohpack(agent, packet, from_mac):
    info = packet.payload
    if packet.ttl != 1:
        raise AssertionError("OHPACK must be a one-hop broadcast")
    record_miss(agent, info.toward, info.flow, info.miss_seqno, info.num_miss_seqno)


def augment_ack(agent, packet):
    """Copy stored miss fields into a forwarded end-to-end ack, then clear them."""
    if packet.kind != ACK:
        return False
    seg = packet.payload
    if seg.miss_seqno:
        return False
    rt = agent.table.get(packet.dst)
    if rt is None or rt.miss_seqno == 0 or rt.miss_flow != seg.flow:
        return False
    seg.miss_seqno = rt.miss_seqno
    seg.num_miss_seqno = rt.num_miss_seqno
    rt.miss_seqno = 0
    rt.num_miss_seqno = 0
    rt.miss_flow = -1
    agent.node.trace("PACK", "augment", f"flow={seg.flow} miss={seg.miss_seqno}/"
                                        f"{seg.num_miss_seqno}")
    return True
