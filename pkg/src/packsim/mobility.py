"""Node placement, random-waypoint movement and unit-disk neighbourhoods."""
import math
from dataclasses import dataclass

import numpy as np

from .engine import NS_PER_S, seconds

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True, slots=True)
class MobilityState:
    position: tuple
    waypoint: tuple
    speed: float
    pause_until: int


def place_grid(rows, cols, spacing, area_w, area_h):
    """Node ``k`` sits at ``(col*spacing, row*spacing)``, grid centred in the area."""
    span_w = (cols - 1) * spacing
    span_h = (rows - 1) * spacing
    if span_w > area_w or span_h > area_h:
        raise ValueError(f"{rows}x{cols} grid with spacing {spacing} m does not fit "
                         f"in {area_w}x{area_h} m")
    ox = (area_w - span_w) / 2.0
    oy = (area_h - span_h) / 2.0
    return [(ox + c * spacing, oy + r * spacing) for r in range(rows) for c in range(cols)]


def place_chain(n, spacing, area_w, area_h):
    return place_grid(1, n, spacing, area_w, area_h)


def place_random(n, area_w, area_h, rng):
    return [(rng.uniform(0, area_w), rng.uniform(0, area_h)) for _ in range(n)]


class Static:
    def __init__(self, pos):
        self.pos = pos

    def position(self, now):
        return self.pos

    def state(self, now):
        return MobilityState(self.pos, self.pos, 0.0, 0)


class RandomWaypoint:
    """Random waypoint: move at uniform speed to a uniform waypoint, pause, repeat.

    Nodes start with a pause at their initial position.  Legs are drawn
    lazily from the node's own stream, always in leg order, so the
    trajectory does not depend on when positions are queried.
    """

    def __init__(self, start, area_w, area_h, v_min, v_max, pause_s, rng):
        self.area_w = area_w
        self.area_h = area_h
        self.v_min = v_min
        self.v_max = v_max
        self.pause = math.inf if pause_s == math.inf else seconds(pause_s)
        self.rng = rng
        self.origin = start
        self.waypoint = start
        self.leg_start = 0
        self.arrive_at = 0
        self.pause_until = self.pause
        self.speed = 0.0
        self.legs = 0

    def _next_leg(self):
        t0 = self.pause_until
        self.origin = self.waypoint
        self.waypoint = (self.rng.uniform(0, self.area_w), self.rng.uniform(0, self.area_h))
        self.speed = max(self.rng.uniform(self.v_min, self.v_max), 1e-6)
        dist = math.dist(self.origin, self.waypoint)
        self.leg_start = t0
        self.arrive_at = t0 + int(round(dist / self.speed * NS_PER_S))
        self.pause_until = self.arrive_at + self.pause
        self.legs += 1

    def _advance(self, now):
        if self.v_max <= 0:
            return
        while now >= self.pause_until:
            self._next_leg()

    def position(self, now):
        self._advance(now)
        if now >= self.arrive_at:
            return self.waypoint
        frac = (now - self.leg_start) / (self.arrive_at - self.leg_start)
        (x0, y0), (x1, y1) = self.origin, self.waypoint
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)

    def state(self, now):
        pos = self.position(now)
        moving = now < self.arrive_at
        return MobilityState(pos, self.waypoint, self.speed if moving else 0.0,
                             self.pause_until if not moving else self.arrive_at)


class Topology:
    """Unit-disk connectivity snapshots.

    Mobile scenarios re-evaluate positions on a fixed grid of instants
    (``refresh_s`` apart); links are symmetric inside each snapshot.
    """

    def __init__(self, models, range_m, refresh_s=0.1, cs_range_m=None):
        self.models = models
        self.range_m = range_m
        # carrier is sensed further than frames can be decoded
        self.cs_range_m = max(cs_range_m or range_m, range_m)
        self.static = all(isinstance(m, Static) for m in models)
        self.refresh = seconds(refresh_s)
        self._key = None
        self._neighbors = None
        self._sensers = None
        self._dist = None
        self.snapshots = 0
        self.blocked = set()

    def __len__(self):
        return len(self.models)

    def positions(self, now):
        return [m.position(now) for m in self.models]

    def _rebuild(self, at):
        pos = np.asarray(self.positions(at), dtype=float).reshape(-1, 2)
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=-1))
        in_range = dist <= self.range_m
        np.fill_diagonal(in_range, False)
        sensed = dist <= self.cs_range_m
        np.fill_diagonal(sensed, False)
        prop = np.rint(dist / SPEED_OF_LIGHT * NS_PER_S).astype(np.int64)
        for a, b in self.blocked:
            in_range[a, b] = in_range[b, a] = False
        nbrs, sens = [], []
        for i in range(len(pos)):
            nbrs.append([(int(j), int(prop[i, j])) for j in np.nonzero(in_range[i])[0]])
            sens.append([(int(j), int(prop[i, j])) for j in np.nonzero(sensed[i])[0]])
        self._neighbors = nbrs
        self._sensers = sens
        self._dist = dist
        self.snapshots += 1

    def _ensure(self, now):
        key = 0 if self.static else now // self.refresh
        if key != self._key:
            self._key = key
            self._rebuild(key * self.refresh)

    def block(self, a, b):
        """Stop frames between ``a`` and ``b`` from decoding; carrier is still sensed."""
        self.blocked.add((a, b))
        self._key = None

    def neighbors(self, node, now):
        """List of ``(neighbor, propagation_delay_ns)`` within radio range."""
        self._ensure(now)
        return self._neighbors[node]

    def sensers(self, node, now):
        """Nodes that sense ``node``'s carrier (a superset of ``neighbors``)."""
        self._ensure(now)
        return self._sensers[node]

    def distance(self, a, b, now):
        self._ensure(now)
        return float(self._dist[a, b])

    def in_range(self, a, b, now):
        if (a, b) in self.blocked or (b, a) in self.blocked:
            return False
        return a != b and self.distance(a, b, now) <= self.range_m
