"""Deterministic discrete-event engine.

Time is kept as integer nanoseconds.  Events fire in ``(fire_at, seq)``
order where ``seq`` is the insertion counter, so two runs of the same
scenario with the same seed dispatch exactly the same sequence.
"""
import hashlib
import heapq
import random

NS_PER_S = 1_000_000_000


def seconds(s):
    """Convert seconds (float) to integer nanosecond ticks."""
    return int(round(s * NS_PER_S))


def to_seconds(ticks):
    return ticks / NS_PER_S


class SchedulingError(RuntimeError):
    pass


class Event:
    __slots__ = ("fire_at", "seq", "target", "action", "fn", "args", "cancelled")

    def __init__(self, fire_at, seq, target, action, fn, args):
        self.fire_at = fire_at
        self.seq = seq
        self.target = target
        self.action = action
        self.fn = fn
        self.args = args
        self.cancelled = False

    def __repr__(self):
        return f"<Event t={self.fire_at} seq={self.seq} node={self.target} {self.action}>"


class RunStats:
    __slots__ = ("scheduled", "dispatched", "cancelled", "remaining", "clock")

    def __init__(self, scheduled=0, dispatched=0, cancelled=0, remaining=0, clock=0):
        self.scheduled = scheduled
        self.dispatched = dispatched
        self.cancelled = cancelled
        self.remaining = remaining
        self.clock = clock

    def __repr__(self):
        return (f"RunStats(scheduled={self.scheduled}, dispatched={self.dispatched}, "
                f"cancelled={self.cancelled}, remaining={self.remaining}, clock={self.clock})")


class Simulator:
    """Single-threaded event loop with an integer clock.

    ``schedule`` returns the :class:`Event` itself; pass it to ``cancel``
    to suppress the firing.  Cancelled events are discarded lazily when they
    reach the head of the heap.
    """

    def __init__(self):
        self.now = 0
        self._heap = []
        self._seq = 0
        self.scheduled = 0
        self.dispatched = 0
        self.cancelled = 0

    def schedule(self, fire_at, fn, *args, target=-1, action="call"):
        if fire_at < self.now:
            raise SchedulingError(f"event at {fire_at} is before now={self.now}")
        ev = Event(fire_at, self._seq, target, action, fn, args)
        self._seq += 1
        self.scheduled += 1
        heapq.heappush(self._heap, (fire_at, ev.seq, ev))
        return ev

    def schedule_in(self, delay, fn, *args, target=-1, action="call"):
        return self.schedule(self.now + delay, fn, *args, target=target, action=action)

    def cancel(self, ev):
        if ev is not None and not ev.cancelled:
            ev.cancelled = True
            self.cancelled += 1

    def pending(self):
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    def run_until(self, t_end):
        heap = self._heap
        pop = heapq.heappop
        dispatched = 0
        while heap and heap[0][0] <= t_end:
            fire_at, _, ev = pop(heap)
            if ev.cancelled:
                continue
            self.now = fire_at
            dispatched += 1
            # fired events can no longer be cancelled
            ev.cancelled = True
            ev.fn(*ev.args)
        self.dispatched += dispatched
        if t_end > self.now:
            self.now = t_end
        return RunStats(self.scheduled, self.dispatched, self.cancelled,
                        self.pending(), self.now)


def derive_seed(master_seed, node, purpose):
    """Stable 64-bit seed for the ``(node, purpose)`` substream."""
    h = hashlib.blake2b(f"{master_seed}:{node}:{purpose}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class RngStreams:
    """Per-(node, purpose) random streams split off a master seed.

    Streams are created on first use and never share state, so adding a
    node or a new purpose tag leaves every other stream's draws unchanged.
    """

    def __init__(self, master_seed):
        self.master_seed = int(master_seed)
        self._streams = {}

    def stream(self, node, purpose):
        key = (node, purpose)
        rng = self._streams.get(key)
        if rng is None:
            rng = random.Random(derive_seed(self.master_seed, node, purpose))
            self._streams[key] = rng
        return rng
