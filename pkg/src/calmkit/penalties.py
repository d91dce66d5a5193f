"""Nonsmooth regularizers: values, exact set-valued prox, subdifferentials, graphs.

Separable families expose a scalar piece phi with g(x) = sum_i phi(x_i).
The prox of a scalar piece is computed by exact enumeration of the finitely
many quadratic pieces of phi(t) + (t - u)^2 / (2*gamma), so it is correct
for every admissible step size, including tie cases where the prox is
set-valued.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graphs_cones import Piece, PolylineGraph, segment

TIE_REL_TOL = 1e-12  # relative tolerance for declaring multiple global prox minimizers


class PenaltyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# interval sets

@dataclass(frozen=True)
class IntervalSet:
    """Finite union of closed intervals (possibly degenerate, possibly empty)."""

    intervals: tuple  # sorted, disjoint (lo, hi) pairs; +-inf endpoints allowed

    @staticmethod
    def empty() -> "IntervalSet":
        return IntervalSet(())

    @staticmethod
    def point(v: float) -> "IntervalSet":
        return IntervalSet(((v, v),))

    @staticmethod
    def closed(lo: float, hi: float) -> "IntervalSet":
        if lo > hi:
            raise ValueError("empty interval bounds")
        return IntervalSet(((lo, hi),))

    @staticmethod
    def of(*pairs) -> "IntervalSet":
        iv = sorted((float(a), float(b)) for a, b in pairs)
        merged = []
        for lo, hi in iv:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        return IntervalSet(tuple(merged))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return any(lo - tol <= v <= hi + tol for lo, hi in self.intervals)

    def distance(self, v: float) -> float:
        if not self.intervals:
            return math.inf
        return min(max(lo - v, v - hi, 0.0) for lo, hi in self.intervals)

    def hull(self):
        if not self.intervals:
            return None
        return (self.intervals[0][0], self.intervals[-1][1])

    def equals(self, other: "IntervalSet", tol: float = 1e-12) -> bool:
        if len(self.intervals) != len(other.intervals):
            return False
        for (a, b), (c, d) in zip(self.intervals, other.intervals):
            for x, y in ((a, c), (b, d)):
                if math.isinf(x) or math.isinf(y):
                    if x != y:
                        return False
                elif abs(x - y) > tol:
                    return False
        return True


@dataclass(frozen=True)
class ProxResult:
    """Exact global solution set of the proximal subproblem."""

    minimizers: tuple          # tuple of numpy vectors
    objective_value: float     # common optimal value of g(x) + ||x-u||^2/(2*gamma)


# ---------------------------------------------------------------------------
# scalar piecewise-quadratic machinery

def _scalar_prox_candidates(pieces, u, gamma):
    """Global argmin set of phi(t) + (t-u)^2/(2 gamma) over quadratic pieces.

    Each piece is (lo, hi, a2, a1, a0) with phi(t) = a2 t^2 + a1 t + a0 on
    [lo, hi].  Returns (sorted argmin tuple, optimal value).
    """
    inv2g = 0.5 / gamma

    def total(t, a2, a1, a0):
        return a2 * t * t + a1 * t + a0 + inv2g * (t - u) ** 2

    cands = []
    for lo, hi, a2, a1, a0 in pieces:
        lead = a2 + inv2g
        if lead > 0.0:
            t = (u / gamma - a1) / (2.0 * lead)
            t = min(max(t, lo), hi)
            if math.isfinite(t):
                cands.append((t, total(t, a2, a1, a0)))
        for t in (lo, hi):
            if math.isfinite(t):
                cands.append((t, total(t, a2, a1, a0)))
    best = min(v for _, v in cands)
    tol = TIE_REL_TOL * (1.0 + abs(best))
    mins = sorted(t for t, v in cands if v <= best + tol)
    out = []
    for t in mins:
        if not out or t - out[-1] > 1e-11 * (1.0 + abs(t)):
            out.append(t)
    return tuple(out), best


# ---------------------------------------------------------------------------
# penalty families

class Penalty:
    """Base class; vector ops are implemented per family or via scalar pieces."""

    family = "abstract"
    gamma_max = math.inf   # prox-boundedness threshold gamma_g
    separable = False

    def value(self, x) -> float:
        raise NotImplementedError

    def prox_coordinate_sets(self, u, gamma):
        raise NotImplementedError

    def prox(self, u, gamma) -> ProxResult:
        if gamma <= 0:
            raise PenaltyError("gamma must be positive")
        if gamma >= self.gamma_max:
            raise PenaltyError("not prox-bounded at this step size")
        u = np.asarray(u, dtype=float)
        sets = self.prox_coordinate_sets(u, gamma)
        count = 1
        for s in sets:
            count *= len(s)
            if count > 128:
                raise PenaltyError("prox tie combinatorics exceed cap")
        minimizers = tuple(np.array(c, dtype=float)
                           for c in itertools.product(*sets))
        x0 = minimizers[0]
        val = self.value(x0) + float(np.dot(x0 - u, x0 - u)) / (2.0 * gamma)
        return ProxResult(minimizers, val)

    def prox_distance(self, x, u, gamma) -> float:
        """dist(x, Prox(u)) using the exact per-coordinate argmin sets."""
        x = np.asarray(x, dtype=float)
        sets = self.prox_coordinate_sets(np.asarray(u, dtype=float), gamma)
        return math.sqrt(sum(min((xi - c) ** 2 for c in s)
                             for xi, s in zip(x, sets)))

    def value_many(self, X) -> np.ndarray:
        return np.array([self.value(x) for x in np.atleast_2d(X)])

    def graph(self) -> PolylineGraph:
        raise PenaltyError("family %r has no one-dimensional graph" % self.family)

    def to_json(self) -> dict:
        raise NotImplementedError


class SeparablePenalty(Penalty):
    """g(x) = sum_i phi(x_i) for one scalar piece phi."""

    separable = True

    def scalar_pieces(self):
        """Quadratic pieces (lo, hi, a2, a1, a0) of phi covering its domain."""
        raise NotImplementedError

    def breakpoints(self):
        bps = set()
        for lo, hi, *_ in self.scalar_pieces():
            for t in (lo, hi):
                if math.isfinite(t):
                    bps.add(t)
        return sorted(bps)

    def scalar_value(self, theta: float) -> float:
        for lo, hi, a2, a1, a0 in self.scalar_pieces():
            if lo <= theta <= hi:
                return a2 * theta * theta + a1 * theta + a0
        return math.inf

    def scalar_value_array(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, math.inf)
        for lo, hi, a2, a1, a0 in self.scalar_pieces():
            m = (theta >= lo) & (theta <= hi)
            out[m] = a2 * theta[m] ** 2 + a1 * theta[m] + a0
        return out

    def value(self, x) -> float:
        return float(sum(self.scalar_value(float(t)) for t in np.atleast_1d(x)))

    def value_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.sum(self.scalar_value_array(X), axis=1)

    def subdiff_bounds_array(self, theta, limiting=False):
        """Per-point hull [lo, hi] of the subdifferential; empty as (+inf, -inf).

        The hull coincides with the subdifferential for interval-valued
        families; the two-point limiting subdifferential of the downward
        kink is over-approximated by its hull (exact scalar routines are
        used wherever exact distances matter).
        """
        theta = np.asarray(theta, dtype=float)
        lo = np.empty(theta.shape)
        hi = np.empty(theta.shape)
        flat_t = theta.reshape(-1)
        flat_lo = lo.reshape(-1)
        flat_hi = hi.reshape(-1)
        sd = self.limiting_subdiff if limiting else self.prox_subdiff
        for i, t in enumerate(flat_t):
            h = sd(float(t)).hull()
            if h is None:
                flat_lo[i], flat_hi[i] = math.inf, -math.inf
            else:
                flat_lo[i], flat_hi[i] = h
        return lo, hi

    def prox_scalar(self, u: float, gamma: float):
        return _scalar_prox_candidates(self.scalar_pieces(), float(u), gamma)[0]

    def prox_coordinate_sets(self, u, gamma):
        return [self.prox_scalar(float(ui), gamma) for ui in np.atleast_1d(u)]

    def prox_subdiff(self, theta: float) -> IntervalSet:
        raise NotImplementedError

    def limiting_subdiff(self, theta: float) -> IntervalSet:
        # semi-convex families: limiting equals proximal (overridden where not)
        return self.prox_subdiff(theta)

    def subdiff_hull(self, t0: float, t1: float, limiting=False):
        """Hull of the subdifferential union over [t0, t1] (cell over-approximation)."""
        sd = self.limiting_subdiff if limiting else self.prox_subdiff
        probes = [t0, t1, 0.5 * (t0 + t1)]
        eps = 1e-9 * (1.0 + abs(t1 - t0))
        for b in self.breakpoints():
            if t0 <= b <= t1:
                probes.extend((b, b - eps, b + eps))
        lo, hi = math.inf, -math.inf
        for t in probes:
            if not (t0 - eps <= t <= t1 + eps):
                continue
            h = sd(t).hull()
            if h is None:
                continue
            lo, hi = min(lo, h[0]), max(hi, h[1])
        if lo > hi:
            return None
        return (lo, hi)


class ZeroPenalty(SeparablePenalty):
    family = "zero"

    def scalar_pieces(self):
        return [(-math.inf, math.inf, 0.0, 0.0, 0.0)]

    def prox_scalar(self, u, gamma):
        return (float(u),)   # identity, bit-exact (PG must reduce to plain GD)

    def prox_subdiff(self, theta):
        return IntervalSet.point(0.0)

    def subdiff_bounds_array(self, theta, limiting=False):
        z = np.zeros(np.asarray(theta, dtype=float).shape)
        return z, z.copy()

    def graph(self):
        return PolylineGraph((Piece((0.0, 0.0), (1.0, 0.0), -math.inf, math.inf),))

    def to_json(self):
        return {"family": "zero"}


class L1Penalty(SeparablePenalty):
    family = "l1"

    def __init__(self, lam: float):
        if lam <= 0:
            raise PenaltyError("lambda must be positive")
        self.lam = float(lam)

    def scalar_pieces(self):
        lam = self.lam
        return [(-math.inf, 0.0, 0.0, -lam, 0.0), (0.0, math.inf, 0.0, lam, 0.0)]

    def prox_subdiff(self, theta):
        if theta > 0:
            return IntervalSet.point(self.lam)
        if theta < 0:
            return IntervalSet.point(-self.lam)
        return IntervalSet.closed(-self.lam, self.lam)

    def subdiff_bounds_array(self, theta, limiting=False):
        theta = np.asarray(theta, dtype=float)
        s = np.sign(theta)
        lo = np.where(s == 0, -self.lam, s * self.lam)
        hi = np.where(s == 0, self.lam, s * self.lam)
        return lo, hi

    def graph(self):
        lam = self.lam
        return PolylineGraph((
            Piece((0.0, -lam), (-1.0, 0.0), 0.0, math.inf),
            segment((0.0, -lam), (0.0, lam)),
            Piece((0.0, lam), (1.0, 0.0), 0.0, math.inf),
        ))

    def to_json(self):
        return {"family": "l1", "lambda": self.lam}


class ScadPenalty(SeparablePenalty):
    family = "scad"

    def __init__(self, lam: float, a: float):
        if lam <= 0 or a <= 2:
            raise PenaltyError("SCAD needs lambda > 0 and a > 2")
        self.lam = float(lam)
        self.a = float(a)

    def scalar_pieces(self):
        lam, a = self.lam, self.a
        c = (a + 1.0) * lam * lam / 2.0
        q2 = -0.5 / (a - 1.0)
        q0 = -lam * lam / (2.0 * (a - 1.0))
        s = a * lam / (a - 1.0)
        return [
            (-math.inf, -a * lam, 0.0, 0.0, c),
            (-a * lam, -lam, q2, -s, q0),
            (-lam, 0.0, 0.0, -lam, 0.0),
            (0.0, lam, 0.0, lam, 0.0),
            (lam, a * lam, q2, s, q0),
            (a * lam, math.inf, 0.0, 0.0, c),
        ]

    def prox_subdiff(self, theta):
        lam, a = self.lam, self.a
        t = abs(theta)
        if theta == 0.0:
            return IntervalSet.closed(-lam, lam)
        if t <= lam:
            return IntervalSet.point(math.copysign(lam, theta))
        if t <= a * lam:
            return IntervalSet.point(math.copysign((a * lam - t) / (a - 1.0), theta))
        return IntervalSet.point(0.0)

    def subdiff_bounds_array(self, theta, limiting=False):
        theta = np.asarray(theta, dtype=float)
        lam, a = self.lam, self.a
        t = np.abs(theta)
        v = np.where(t <= lam, lam,
                     np.where(t <= a * lam, (a * lam - t) / (a - 1.0), 0.0))
        v = np.sign(theta) * v
        lo = np.where(theta == 0.0, -lam, v)
        hi = np.where(theta == 0.0, lam, v)
        return lo, hi

    def graph(self):
        lam, a = self.lam, self.a
        return PolylineGraph((
            Piece((-a * lam, 0.0), (-1.0, 0.0), 0.0, math.inf),
            segment((-a * lam, 0.0), (-lam, -lam)),
            segment((-lam, -lam), (0.0, -lam)),
            segment((0.0, -lam), (0.0, lam)),
            segment((0.0, lam), (lam, lam)),
            segment((lam, lam), (a * lam, 0.0)),
            Piece((a * lam, 0.0), (1.0, 0.0), 0.0, math.inf),
        ))

    def to_json(self):
        return {"family": "scad", "lambda": self.lam, "a": self.a}


class McpPenalty(SeparablePenalty):
    family = "mcp"

    def __init__(self, lam: float, a: float):
        if lam <= 0 or a <= 1:
            raise PenaltyError("MCP needs lambda > 0 and a > 1")
        self.lam = float(lam)
        self.a = float(a)

    def scalar_pieces(self):
        lam, a = self.lam, self.a
        c = a * lam * lam / 2.0
        q2 = -0.5 / a
        return [
            (-math.inf, -a * lam, 0.0, 0.0, c),
            (-a * lam, 0.0, q2, -lam, 0.0),
            (0.0, a * lam, q2, lam, 0.0),
            (a * lam, math.inf, 0.0, 0.0, c),
        ]

    def prox_subdiff(self, theta):
        # derived by differentiating psi on (0, a*lam); oracle-checked, not cited
        lam, a = self.lam, self.a
        t = abs(theta)
        if theta == 0.0:
            return IntervalSet.closed(-lam, lam)
        if t <= a * lam:
            return IntervalSet.point(math.copysign(lam - t / a, theta))
        return IntervalSet.point(0.0)

    def subdiff_bounds_array(self, theta, limiting=False):
        theta = np.asarray(theta, dtype=float)
        lam, a = self.lam, self.a
        t = np.abs(theta)
        v = np.sign(theta) * np.where(t <= a * lam, lam - t / a, 0.0)
        lo = np.where(theta == 0.0, -lam, v)
        hi = np.where(theta == 0.0, lam, v)
        return lo, hi

    def graph(self):
        lam, a = self.lam, self.a
        return PolylineGraph((
            Piece((-a * lam, 0.0), (-1.0, 0.0), 0.0, math.inf),
            segment((-a * lam, 0.0), (0.0, -lam)),
            segment((0.0, -lam), (0.0, lam)),
            segment((0.0, lam), (a * lam, 0.0)),
            Piece((a * lam, 0.0), (1.0, 0.0), 0.0, math.inf),
        ))

    def to_json(self):
        return {"family": "mcp", "lambda": self.lam, "a": self.a}


class NegAbsPenalty(SeparablePenalty):
    """phi(theta) = -lambda * |theta|: the downward kink at 0 has empty
    proximal subdifferential while the limiting one is {-lambda, lambda}."""

    family = "negabs"

    def __init__(self, lam: float):
        if lam <= 0:
            raise PenaltyError("lambda must be positive")
        self.lam = float(lam)

    def scalar_pieces(self):
        lam = self.lam
        return [(-math.inf, 0.0, 0.0, lam, 0.0), (0.0, math.inf, 0.0, -lam, 0.0)]

    def prox_subdiff(self, theta):
        if theta == 0.0:
            return IntervalSet.empty()
        return IntervalSet.point(-math.copysign(self.lam, theta))

    def limiting_subdiff(self, theta):
        if theta == 0.0:
            return IntervalSet.of((-self.lam, -self.lam), (self.lam, self.lam))
        return self.prox_subdiff(theta)

    def subdiff_bounds_array(self, theta, limiting=False):
        theta = np.asarray(theta, dtype=float)
        lam = self.lam
        v = -np.sign(theta) * lam
        if limiting:
            lo = np.where(theta == 0.0, -lam, v)
            hi = np.where(theta == 0.0, lam, v)
        else:
            lo = np.where(theta == 0.0, math.inf, v)
            hi = np.where(theta == 0.0, -math.inf, v)
        return lo, hi

    def graph(self):
        # closure of gph(prox-subdifferential) = graph of the limiting one
        lam = self.lam
        return PolylineGraph((
            Piece((0.0, lam), (-1.0, 0.0), 0.0, math.inf),
            Piece((0.0, -lam), (1.0, 0.0), 0.0, math.inf),
        ))

    def to_json(self):
        return {"family": "negabs", "lambda": self.lam}


class BoxIndicator(SeparablePenalty):
    """Indicator of [lower, upper]^n (one shared scalar interval)."""

    family = "box-indicator"

    def __init__(self, lower: float, upper: float):
        if not lower < upper:
            raise PenaltyError("box needs lower < upper")
        self.lower = float(lower)
        self.upper = float(upper)

    def scalar_pieces(self):
        return [(self.lower, self.upper, 0.0, 0.0, 0.0)]

    def scalar_value(self, theta):
        return 0.0 if self.lower <= theta <= self.upper else math.inf

    def prox_subdiff(self, theta):
        if theta < self.lower or theta > self.upper:
            return IntervalSet.empty()
        lo = -math.inf if theta <= self.lower else 0.0
        hi = math.inf if theta >= self.upper else 0.0
        return IntervalSet.closed(lo, hi)

    def subdiff_bounds_array(self, theta, limiting=False):
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= self.lower) & (theta <= self.upper)
        lo = np.where(inside, np.where(theta <= self.lower, -math.inf, 0.0), math.inf)
        hi = np.where(inside, np.where(theta >= self.upper, math.inf, 0.0), -math.inf)
        return lo, hi

    def graph(self):
        lo, hi = self.lower, self.upper
        return PolylineGraph((
            Piece((lo, 0.0), (0.0, -1.0), 0.0, math.inf),
            segment((lo, 0.0), (hi, 0.0)),
            Piece((hi, 0.0), (0.0, 1.0), 0.0, math.inf),
        ))

    def to_json(self):
        return {"family": "box-indicator", "lower": self.lower, "upper": self.upper}


class GroupLasso(Penalty):
    """g(x) = sum_J w_J ||x_J||_2 over a disjoint partition of coordinates."""

    family = "group-lasso"
    separable = False

    def __init__(self, groups, weights):
        groups = [tuple(int(i) for i in g) for g in groups]
        weights = [float(w) for w in weights]
        if len(groups) != len(weights):
            raise PenaltyError("one weight per group required")
        if any(w < 0 for w in weights):
            raise PenaltyError("weights must be nonnegative")
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(len(flat))):
            raise PenaltyError("groups must partition 0..n-1 disjointly")
        self.groups = tuple(groups)
        self.weights = tuple(weights)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(w * np.linalg.norm(x[list(g)])
                         for g, w in zip(self.groups, self.weights)))

    def value_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        tot = np.zeros(X.shape[0])
        for g, w in zip(self.groups, self.weights):
            tot += w * np.linalg.norm(X[:, list(g)], axis=1)
        return tot

    def prox_vector(self, u, gamma):
        u = np.asarray(u, dtype=float)
        out = np.array(u, dtype=float)
        for g, w in zip(self.groups, self.weights):
            idx = list(g)
            nrm = np.linalg.norm(u[idx])
            scale = 0.0 if nrm <= gamma * w else 1.0 - gamma * w / nrm
            out[idx] = scale * u[idx]
        return out

    def prox_coordinate_sets(self, u, gamma):
        x = self.prox_vector(u, gamma)
        return [(float(v),) for v in x]

    def subdiff_block_distance(self, x, v):
        """dist(v, d(w||.||)(x)) per block, combined in the l2 norm."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        total = 0.0
        for g, w in zip(self.groups, self.weights):
            idx = list(g)
            xg, vg = x[idx], v[idx]
            nrm = np.linalg.norm(xg)
            if nrm > 0:
                d = np.linalg.norm(vg - w * xg / nrm)
            else:
                d = max(np.linalg.norm(vg) - w, 0.0)
            total += d * d
        return math.sqrt(total)

    def to_json(self):
        return {"family": "group-lasso",
                "groups": [list(g) for g in self.groups],
                "weights": list(self.weights)}


# ---------------------------------------------------------------------------
# spec-facing operations

def penalty_value(g: Penalty, x):
    return g.value(x)


def prox(g: Penalty, u, gamma: float) -> ProxResult:
    return g.prox(u, gamma)


def prox_subdiff_scalar(g: Penalty, theta: float) -> IntervalSet:
    if not g.separable:
        raise PenaltyError("scalar subdifferential requires a separable family")
    return g.prox_subdiff(float(theta))


def limiting_subdiff_scalar(g: Penalty, theta: float) -> IntervalSet:
    if not g.separable:
        raise PenaltyError("scalar subdifferential requires a separable family")
    return g.limiting_subdiff(float(theta))


def graph(g: Penalty) -> PolylineGraph:
    return g.graph()


def penalty_from_json(d: dict) -> Penalty:
    fam = d.get("family")
    if fam == "zero":
        return ZeroPenalty()
    if fam == "l1":
        return L1Penalty(d["lambda"])
    if fam == "scad":
        return ScadPenalty(d["lambda"], d["a"])
    if fam == "mcp":
        return McpPenalty(d["lambda"], d["a"])
    if fam == "negabs":
        return NegAbsPenalty(d["lambda"])
    if fam == "box-indicator":
        return BoxIndicator(d["lower"], d["upper"])
    if fam == "group-lasso":
        return GroupLasso(d["groups"], d["weights"])
    raise PenaltyError("unknown penalty family %r" % fam)
