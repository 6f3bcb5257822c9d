"""Node assembly and the single-run driver."""
import math

from .aodv import AodvAgent, RoutingConfig
from .engine import NS_PER_S, RngStreams, Simulator, seconds
from .metrics import FtpFlow, MetricsAccumulator
from .mobility import RandomWaypoint, Static, Topology, place_chain, place_grid, place_random
from .packet import ACK, DATA, reset_uids
from .part import PartAgent
from .radio import Channel, Mac, MacConfig
from .tcp import TcpConfig, TcpReceiver, make_sender
from .trace import Tracer


class Node:
    def __init__(self, node_id, sim, metrics, tracer, rng):
        self.id = node_id
        self.sim = sim
        self.metrics = metrics
        self.tracer = tracer
        self.rng = rng
        self.mac = None
        self.routing = None
        # flow -> MAC address of the last hop a data frame came from
        self.upstream = {}
        self.flow_ends = {}
        self.senders = {}
        self.receivers = {}
        self.faults = set()

    def trace(self, layer, event, detail=""):
        if self.tracer.enabled:
            self.tracer.log(self.sim.now, self.id, layer, event, detail)

    def receive(self, packet, from_mac):
        if packet.kind == DATA and self.faults:
            key = (packet.payload.flow, packet.payload.seqno)
            if key in self.faults:
                self.faults.discard(key)
                self.drop(packet, "FAULT")
                return
        self.routing.recv(packet, from_mac)

    def deliver_local(self, packet):
        seg = packet.payload
        if packet.kind == DATA:
            rcv = self.receivers.get(seg.flow)
            if rcv is None:
                self.drop(packet, "NOFLOW")
                return
            if self.tracer.enabled:
                self.trace("AGT", "r", packet.describe())
            rcv.on_data(seg)
        elif packet.kind == ACK:
            snd = self.senders.get(seg.flow)
            if snd is None:
                self.drop(packet, "NOFLOW")
                return
            if self.tracer.enabled:
                self.trace("AGT", "r", packet.describe())
            snd.on_ack(seg)

    def drop(self, packet, reason):
        if self.tracer.enabled:
            self.trace("DROP", reason, packet.describe())
        self.metrics.dropped(packet, reason)
        if packet.kind == DATA:
            self.metrics.copy_gone(packet.payload.flow, packet.payload.seqno)

    def pack_notify(self, flow, miss_seqno, num_miss_seqno):
        snd = self.senders.get(flow)
        if snd is not None:
            snd.on_pack_notification(miss_seqno, num_miss_seqno)

    def has_active_flow_to(self, dest):
        return any(s.dst == dest and s.started for s in self.senders.values())


def layout_positions(cfg, streams):
    kind, layout = next(iter(cfg["nodes"].items()))
    w, h = cfg["area_w"], cfg["area_h"]
    if kind == "grid":
        return place_grid(layout["rows"], layout["cols"], layout.get("spacing", 200.0), w, h)
    if kind == "chain":
        return place_chain(layout["n"], layout.get("spacing", 200.0), w, h)
    if kind == "random":
        return place_random(int(layout), w, h, streams.stream(-1, "placement"))
    return [tuple(p) for p in layout]


def resolve_flows(cfg, n_nodes, streams):
    given = cfg["flows"]
    flows = []
    if isinstance(given, list):
        for i, f in enumerate(given):
            flows.append(FtpFlow(i, int(f["src"]), int(f["dst"]),
                                 seconds(f.get("start_s", 1.0))))
    else:
        rng = streams.stream(-1, "flows")
        start = given.get("start_s", 1.0)
        stagger = given.get("stagger_s", 1.0)
        for i in range(int(given["random"])):
            src = rng.randrange(n_nodes)
            dst = rng.randrange(n_nodes - 1)
            if dst >= src:
                dst += 1
            flows.append(FtpFlow(i, src, dst, seconds(start + i * stagger)))
    for f in flows:
        if not (0 <= f.src < n_nodes and 0 <= f.dst < n_nodes) or f.src == f.dst:
            raise ValueError(f"flow {f.flow}: bad endpoints {f.src}->{f.dst}")
    return flows


def routing_config(cfg):
    r = cfg["routing"]
    return RoutingConfig(
        rreq_retries=r["rreq_retries"], rreq_ttl=r["rreq_ttl"],
        discovery_timeout_s=r["discovery_timeout_s"],
        route_lifetime_s=r["route_lifetime_s"], min_allowable_hc=r["min_allowable_hc"],
        phc_rounding=r["phc_rounding"], repair_ttl=r["repair_ttl"],
        repair_timeout_s=r["repair_timeout_s"], repair_retries=r["repair_retries"],
        proxy_error_window_s=r["proxy_error_window_s"],
        proxy_error_threshold=r["proxy_error_threshold"])


def tcp_config(cfg):
    t = cfg["tcp"]
    return TcpConfig(variant=t["variant"], mss_bytes=t["mss_bytes"],
                     init_ssthresh_bytes=t["init_ssthresh_bytes"],
                     rwnd_segments=t["rwnd_segments"], vegas_alpha=t["vegas_alpha"],
                     vegas_beta=t["vegas_beta"], ww_filter_gain=t["ww_filter_gain"])


class Network:
    """Everything for one run, built from a resolved scenario config."""

    def __init__(self, cfg, tracer=None, keep_cwnd_log=False):
        self.cfg = cfg
        reset_uids()
        self.sim = Simulator()
        self.streams = RngStreams(cfg["seed"])
        self.tracer = tracer if tracer is not None else Tracer(enabled=False)
        self.tcp_cfg = tcp_config(cfg)
        self.metrics = MetricsAccumulator(self.tcp_cfg.mss_bytes)

        positions = layout_positions(cfg, self.streams)
        mob = cfg["mobility"]
        if mob["model"] == "rwp" and mob["v_max"] > 0 and mob["pause_s"] != math.inf:
            models = [RandomWaypoint(p, cfg["area_w"], cfg["area_h"], mob["v_min"],
                                     mob["v_max"], mob["pause_s"],
                                     self.streams.stream(i, "mobility"))
                      for i, p in enumerate(positions)]
        else:
            models = [Static(p) for p in positions]
        radio = cfg["radio"]
        self.topology = Topology(models, radio["range_m"], radio["topology_refresh_s"],
                                 radio["cs_range_m"])
        self.mac_cfg = MacConfig(link_rate_bps=radio["link_rate_bps"],
                                 mac_retries=radio["mac_retries"], ifq_len=radio["ifq_len"])
        self.channel = Channel(self.sim, self.topology, self.mac_cfg)

        rcfg = routing_config(cfg)
        protocol = cfg["routing"]["protocol"]
        self.nodes = []
        for i in range(len(positions)):
            node = Node(i, self.sim, self.metrics, self.tracer,
                        self.streams.stream(i, "routing"))
            if protocol == "part":
                node.routing = PartAgent(node, rcfg, pack_enabled=cfg["routing"]["pack"])
            else:
                node.routing = AodvAgent(node, rcfg)
            node.mac = Mac(i, self.sim, self.channel, self.streams.stream(i, "mac"),
                           node.receive, node.routing.link_failed, node.drop)
            self.nodes.append(node)
        self.channel.nodes = self.nodes

        self.flows = resolve_flows(cfg, len(self.nodes), self.streams)
        self.senders = []
        for f in self.flows:
            self.metrics.add_flow(f)
            src, dst = self.nodes[f.src], self.nodes[f.dst]
            snd = make_sender(self.tcp_cfg.variant, src, f.flow, f.dst, self.tcp_cfg,
                              start_at=f.start_at)
            if keep_cwnd_log:
                snd.cwnd_log = []
            src.senders[f.flow] = snd
            dst.receivers[f.flow] = TcpReceiver(dst, f.flow, f.src)
            for node in self.nodes:
                node.flow_ends[f.flow] = (f.src, f.dst)
            self.sim.schedule(f.start_at, self._start, snd, target=f.src, action="AppTick")
            self.senders.append(snd)
        for fault in cfg["faults"]:
            self.nodes[fault["node"]].faults.add((fault["flow"], fault["seqno"]))

    def _start(self, snd):
        snd.start()
        if isinstance(snd.node.routing, PartAgent):
            snd.node.routing.watch(snd)

    def run(self):
        t_end = seconds(self.cfg["duration_s"])
        self.stats = self.sim.run_until(t_end)
        return self.results()

    def results(self):
        m = self.metrics
        t_end = self.sim.now
        per_flow = {}
        for f in self.flows:
            st = m.flows[f.flow]
            per_flow[f.flow] = {
                "src": f.src, "dst": f.dst,
                "throughput_bps": m.throughput(t_end, f.flow),
                "unique_sent": st.unique_sent, "delivered": st.delivered,
                "lost": m.lost(f.flow), "in_flight": m.in_flight(f.flow),
                "transmissions": st.transmissions,
            }
        ch = self.channel.stats
        return {
            "throughput_bps": m.throughput(t_end),
            "loss_pct": m.packet_loss_rate(),
            "avg_delay_s": m.average_delay(),
            "overhead_pkts": m.routing_overhead(),
            "overhead_ratio": m.overhead_ratio(),
            "control": dict(m.control),
            "flows": per_flow,
            "audit": m.audit(),
            "packs": len(m.packs),
            "pack_retransmits": sum(s.pack_retransmits for s in self.senders),
            "fast_retransmits": sum(s.fast_retransmits for s in self.senders),
            "timeouts": sum(s.timeouts for s in self.senders),
            "radio": dict(vars(ch)),
            "events": self.stats.dispatched,
            "sim_time_s": t_end / NS_PER_S,
        }


def simulate(cfg, trace_path=None, trace=False, keep_cwnd_log=False):
    """Run one scenario config; returns ``(results, network)``."""
    tracer = Tracer(trace_path, enabled=trace or bool(cfg["trace"]["enabled"]))
    try:
        tracer.header({"config": cfg})
        net = Network(cfg, tracer, keep_cwnd_log=keep_cwnd_log)
        res = net.run()
    finally:
        tracer.close()
    res["trace_digest"] = tracer.digest() if tracer.enabled else None
    return res, net
