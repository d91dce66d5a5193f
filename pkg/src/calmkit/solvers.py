"""Proximal gradient and proximal point iterations with full perturbation traces."""

from __future__ import annotations

import math

import numpy as np

from .core import ConfigError, IterateTrace, NumericAbort, ProblemSpec, SolverConfig
from .oracle import brute_force_scalar_min
from .penalties import _scalar_prox_candidates


def _select_from_candidates(cands, ref):
    """Closest candidate to ref; ties broken toward the smaller value."""
    best = None
    for c in sorted(cands):
        d = abs(c - ref)
        if best is None or d < best[0] - 1e-15:
            best = (d, c)
    return best[1]


def _pg_step(prob: ProblemSpec, gamma: float, x: np.ndarray) -> np.ndarray:
    u = x - gamma * prob.loss.gradient(x)
    sets = prob.penalty.prox_coordinate_sets(u, gamma)
    return np.array([_select_from_candidates(s, xi) for s, xi in zip(sets, x)])


def _residual(prob: ProblemSpec, gamma: float, x: np.ndarray) -> float:
    u = x - gamma * prob.loss.gradient(x)
    return prob.penalty.prox_distance(x, u, gamma)


def _guard_finite(prob, x, F):
    if not math.isfinite(F) or not np.all(np.isfinite(x)):
        raise NumericAbort("non-finite objective or iterate (F=%r)" % F)


def pg_solve(prob: ProblemSpec, cfg: SolverConfig, x0) -> IterateTrace:
    """Run x^{k+1} in Prox_g^gamma(x^k - gamma grad f(x^k)).

    When the prox is set-valued the minimizer closest to x^k is selected
    (ties toward the lexicographically smaller point), which keeps traces
    deterministic.  Stops when ||x^{k+1} - x^k|| <= stop_tol.
    """
    cfg.validate(prob)
    x = np.array(x0, dtype=float)
    if x.shape != (prob.n,):
        raise ConfigError("x0 has wrong dimension")
    tr = IterateTrace(prob.n)
    F = prob.objective(x)
    _guard_finite(prob, x, F)
    tr.append(x, F, _residual(prob, cfg.gamma, x))
    for _ in range(cfg.max_iter):
        x_new = _pg_step(prob, cfg.gamma, x)
        F = prob.objective(x_new)
        _guard_finite(prob, x_new, F)
        if cfg.lipschitz_box is not None and \
                cfg.lipschitz_box.distance(x_new) > cfg.lipschitz_box.diameter():
            raise NumericAbort("iterate left the Lipschitz box by more than its diameter")
        tr.append(x_new, F, _residual(prob, cfg.gamma, x_new))
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= cfg.stop_tol:
            break
    return tr


# ---------------------------------------------------------------------------
# proximal point

def _f_prox_exact_separable(prob, gamma, xk):
    """Exact F-prox when f is diagonal quadratic and g separable."""
    Q, q = prob.loss.Q, prob.loss.q
    out = np.empty(prob.n)
    for i in range(prob.n):
        base = prob.penalty.scalar_pieces()
        pieces = [(lo, hi, a2 + 0.5 * Q[i, i], a1 + q[i], a0)
                  for lo, hi, a2, a1, a0 in base]
        cands, _ = _scalar_prox_candidates(pieces, float(xk[i]), gamma)
        out[i] = _select_from_candidates(cands, float(xk[i]))
    return out


def _f_prox_oracle(prob, gamma, xk, window, grid=1e-6):
    """Brute-force global minimization of F(x) + ||x - xk||^2 / (2 gamma)."""
    if prob.n == 1:
        def fn(ts):
            X = ts[:, None]
            return prob.loss.value_many(X) + prob.penalty.value_many(X) \
                + (ts - xk[0]) ** 2 / (2.0 * gamma)
        pts, _, _ = brute_force_scalar_min(fn, xk[0] - window, xk[0] + window, grid)
        return np.array([_select_from_candidates(pts, float(xk[0]))])
    # n == 2: coarse grid then shrinking stencil refinement
    def fvec(X):
        return prob.loss.value_many(X) + prob.penalty.value_many(X) \
            + np.sum((X - xk[None, :]) ** 2, axis=1) / (2.0 * gamma)

    cells = 201
    ax = [np.linspace(xk[i] - window, xk[i] + window, cells) for i in range(2)]
    G0, G1 = np.meshgrid(ax[0], ax[1], indexing="ij")
    X = np.stack([G0.reshape(-1), G1.reshape(-1)], axis=1)
    V = fvec(X).reshape(cells, cells)
    h = ax[0][1] - ax[0][0]
    # local minima over the 8-neighborhood
    pad = np.pad(V, 1, constant_values=np.inf)
    isloc = np.ones_like(V, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            isloc &= V <= pad[1 + di: 1 + di + cells, 1 + dj: 1 + dj + cells]
    cand = X[isloc.reshape(-1)]
    offsets = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
    refined = []
    for c in cand:
        x, r = np.array(c), h
        best = float(fvec(x[None, :])[0])
        for _ in range(2000):
            if r <= 1e-10:
                break
            pts = x[None, :] + r * offsets
            vals = fvec(pts)
            i = int(np.argmin(vals))
            if vals[i] < best:
                best, x = float(vals[i]), pts[i]
            else:
                r *= 0.5
        refined.append((best, x))
    vbest = min(v for v, _ in refined)
    tol = 1e-9 * (1.0 + abs(vbest))
    finalists = [x for v, x in refined if v <= vbest + tol]
    finalists.sort(key=lambda x: (np.linalg.norm(x - xk), tuple(x)))
    return finalists[0]


def ppa_solve(prob: ProblemSpec, cfg: SolverConfig, x0, oracle_window=None) -> IterateTrace:
    """Proximal point iteration x^{k+1} = Prox_{f+g}^gamma(x^k).

    The F-prox is exact for diagonal quadratic f with separable g, and
    computed by the brute-force oracle for n <= 2 otherwise.
    """
    cfg.validate(prob)
    x = np.array(x0, dtype=float)
    exact = (prob.loss.family == "quadratic" and prob.penalty.separable
             and np.allclose(prob.loss.Q, np.diag(np.diag(prob.loss.Q))))
    if not exact and prob.n > 2:
        raise ConfigError("PPA needs n <= 2 or diagonal quadratic f with separable g")
    tr = IterateTrace(prob.n)
    F = prob.objective(x)
    _guard_finite(prob, x, F)
    tr.append(x, F, _residual(prob, cfg.gamma, x))
    for _ in range(cfg.max_iter):
        if exact:
            x_new = _f_prox_exact_separable(prob, cfg.gamma, x)
        else:
            window = oracle_window or 20.0 * (1.0 + float(np.max(np.abs(x))))
            x_new = np.asarray(_f_prox_oracle(prob, cfg.gamma, x, window), dtype=float)
        F = prob.objective(x_new)
        _guard_finite(prob, x_new, F)
        tr.append(x_new, F, _residual(prob, cfg.gamma, x_new))
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= cfg.stop_tol:
            break
    return tr
