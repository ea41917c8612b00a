"""Exact algebra on finite unions of disjoint closed real intervals.

Canonical form: sorted, pairwise disjoint, touching intervals merged; the
closed-interval convention makes a degenerate touch (e.g. the intersection of
[.,1.5] and [1.5,.]) a measure-zero singleton rather than empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = ["IntervalSet"]


def _canonical(pairs: Iterable) -> tuple:
    items = []
    for l, u in pairs:
        l, u = float(l), float(u)
        if u < l:
            raise ValueError(f"interval [{l}, {u}] has negative length")
        items.append((l, u))
    items.sort()
    merged = []
    for l, u in items:
        if merged and l <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], u)
        else:
            merged.append([l, u])
    return tuple((l, u) for l, u in merged)


@dataclass(frozen=True)
class IntervalSet:
    intervals: tuple

    def __post_init__(self):
        object.__setattr__(self, "intervals", _canonical(self.intervals))

    # -- constructors

    @staticmethod
    def empty() -> "IntervalSet":
        return IntervalSet(())

    @staticmethod
    def from_pairs(pairs: Iterable) -> "IntervalSet":
        return IntervalSet(tuple((float(l), float(u)) for l, u in pairs))

    @staticmethod
    def from_points(points: Sequence[float]) -> "IntervalSet":
        return IntervalSet(tuple((float(p), float(p)) for p in points))

    @staticmethod
    def interval(l: float, u: float) -> "IntervalSet":
        return IntervalSet(((float(l), float(u)),))

    @staticmethod
    def union_all(sets: Sequence["IntervalSet"]) -> "IntervalSet":
        """Union of many sets with a single canonicalization pass."""
        pairs = []
        for s in sets:
            pairs.extend(s.intervals)
        return IntervalSet(tuple(pairs))

    # -- queries

    @property
    def is_empty(self) -> bool:
        return len(self.intervals) == 0

    @property
    def component_count(self) -> int:
        return len(self.intervals)

    def measure(self) -> float:
        return float(sum(u - l for l, u in self.intervals))

    def contains(self, x: float) -> bool:
        return any(l <= x <= u for l, u in self.intervals)

    def point_dist(self, x: float) -> float:
        """Distance from x to the set (inf for the empty set)."""
        if self.is_empty:
            return float("inf")
        best = float("inf")
        for l, u in self.intervals:
            if l <= x <= u:
                return 0.0
            best = min(best, abs(x - l), abs(x - u))
        return best

    # -- algebra

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    __or__ = union

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(tuple(out))

    __and__ = intersect

    def fatten(self, rho: float) -> "IntervalSet":
        """Closure of the rho-neighborhood: [l - rho, u + rho] per component."""
        if rho < 0:
            raise ValueError("rho must be nonnegative")
        return IntervalSet(tuple((l - rho, u + rho) for l, u in self.intervals))

    def complement_in(self, window) -> "IntervalSet":
        """Closure of window minus self (window is a pair (lo, hi))."""
        lo, hi = float(window[0]), float(window[1])
        if hi < lo:
            raise ValueError("bad window")
        out = []
        cur = lo
        for l, u in self.intervals:
            if u < lo or l > hi:
                continue
            if l > cur:
                out.append((cur, min(l, hi)))
            cur = max(cur, u)
            if cur >= hi:
                break
        if cur < hi:
            out.append((cur, hi))
        return IntervalSet(tuple(out))

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        """Set difference up to boundary points (closed-set bookkeeping keeps
        the measure exact).  Linear two-pointer sweep over both canonical
        component lists."""
        out = []
        ob = other.intervals
        j = 0
        for l, u in self.intervals:
            cur = l
            while j < len(ob) and ob[j][1] < cur:
                j += 1
            k = j
            while k < len(ob) and ob[k][0] <= u:
                ol, ou = ob[k]
                if ol > cur:
                    out.append((cur, min(ol, u)))
                cur = max(cur, ou)
                if cur >= u:
                    break
                k += 1
            if cur < u:
                out.append((cur, u))
        return IntervalSet(tuple(out))

    def intersect_complement(self, ol: float, ou: float) -> "IntervalSet":
        out = []
        for l, u in self.intervals:
            if ou < l or ol > u:
                out.append((l, u))
                continue
            if l < ol:
                out.append((l, min(u, ol)))
            if u > ou:
                out.append((max(l, ou), u))
        return IntervalSet(tuple(out))

    def sample_points(self, n: int) -> np.ndarray:
        """n points spread over the set by measure (component midpoints and
        endpoints for degenerate sets)."""
        if self.is_empty or n < 1:
            return np.zeros(0)
        total = self.measure()
        if total == 0.0:
            pts = np.array([l for l, _ in self.intervals])
            return pts[: n] if len(pts) > n else pts
        qs = (np.arange(n) + 0.5) / n * total
        out = np.empty(n)
        acc = 0.0
        idx = 0
        for l, u in self.intervals:
            width = u - l
            while idx < n and qs[idx] <= acc + width:
                out[idx] = l + (qs[idx] - acc)
                idx += 1
            acc += width
        while idx < n:
            out[idx] = self.intervals[-1][1]
            idx += 1
        return out

    # -- serialization

    def to_json(self) -> str:
        return json.dumps([[l, u] for l, u in self.intervals])

    @staticmethod
    def from_json(text: str) -> "IntervalSet":
        return IntervalSet.from_pairs(json.loads(text))
