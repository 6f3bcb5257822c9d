"""Layered packet model: MAC frame > routing packet > TCP segment."""
from dataclasses import dataclass, field
from itertools import count

BROADCAST = -1

DATA = "DATA"
ACK = "ACK"
RREQ = "RREQ"
RREP = "RREP"
RERR = "RERR"
PACK = "PACK"
OHPACK = "OHPACK"

CONTROL_KINDS = frozenset({RREQ, RREP, RERR, PACK, OHPACK})

IP_HEADER = 20
TCP_HEADER = 20
RREQ_SIZE = 48
RREP_SIZE = 44
RERR_SIZE = 32
PACK_SIZE = 32

_uid = count(1)


@dataclass(slots=True)
class TcpSegment:
    flow: int
    seqno: int = 0
    ack_no: int = 0
    is_ack: bool = False
    miss_seqno: int = 0
    num_miss_seqno: int = 0
    sent_at: int = 0
    ts_echo: int = -1
    size: int = 0


@dataclass(slots=True)
class Rreq:
    origin: int
    dest: int
    bid: int
    hop_count: int = 0
    origin_seq: int = 0
    dest_seq: int = 0
    repair: bool = False
    # repair requests: only routes strictly shorter than this may answer
    bound: int = 0


@dataclass(slots=True)
class Rrep:
    origin: int
    dest: int
    hop_count: int = 0
    dest_seq: int = 0
    phc: int = 0
    proxy: int = -1


@dataclass(slots=True)
class Rerr:
    dests: tuple
    reset_flag: bool = False
    # (source, dest) of the connection a RESET refers to
    connection: tuple = None


@dataclass(slots=True)
class PackPacket:
    flow: int
    miss_seqno: int
    num_miss_seqno: int
    toward: int
    proxy: int


@dataclass(slots=True)
class Packet:
    kind: str
    src: int
    dst: int
    payload: object
    size: int
    ttl: int = 64
    hops: int = 0
    # proxy stamped by the TCP source from its route entry (PART only)
    proxy: int = -1
    uid: int = field(default_factory=lambda: next(_uid))

    @property
    def is_control(self):
        return self.kind in CONTROL_KINDS

    def describe(self):
        p = self.payload
        if self.kind in (DATA, ACK):
            return (f"{self.kind} uid={self.uid} {self.src}->{self.dst} flow={p.flow} "
                    f"seq={p.seqno} ack={p.ack_no} miss={p.miss_seqno}/{p.num_miss_seqno}")
        return f"{self.kind} uid={self.uid} {self.src}->{self.dst} ttl={self.ttl} {p}"


def reset_uids():
    """Restart packet numbering; called at the start of every run."""
    global _uid
    _uid = count(1)


@dataclass(slots=True)
class Frame:
    src_mac: int
    dst_mac: int
    payload: Packet
    tx_start: int = 0
    airtime: int = 0
    retries: int = 0
