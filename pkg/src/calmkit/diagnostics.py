"""Verification of the descent/cost-to-go/rate inequalities along traces,
error-bound and KL-exponent estimation, and stationarity classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import IterateTrace, ProblemSpec, StationarySetApprox, distance_to_set

EPS = float(np.finfo(float).eps)


def kappa1(gamma: float, L: float) -> float:
    """Sufficient-descent constant 1/(2 gamma) - L/2 (valid for gamma < 1/L)."""
    return 0.5 / gamma - 0.5 * L


def kappa2(gamma: float, L: float) -> float:
    """Cost-to-go constant max{1/gamma + (L+1)/2, L/2 + 1/(2 gamma)}."""
    return max(1.0 / gamma + (L + 1.0) / 2.0, L / 2.0 + 0.5 / gamma)


@dataclass
class InequalityReport:
    name: str
    constant: float
    checked: int
    violations: list = field(default_factory=list)  # (k, slack) with slack > 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self):
        return {"name": self.name, "constant": self.constant,
                "checked": self.checked, "violations": self.violations,
                "ok": self.ok}


def verify_sufficient_descent(trace: IterateTrace, gamma: float, L: float) -> InequalityReport:
    """F(x^{k+1}) - F(x^k) <= -kappa1 ||x^{k+1} - x^k||^2 at every step."""
    k1 = kappa1(gamma, L)
    rep = InequalityReport("sufficient-descent", k1, 0)
    for k in range(1, len(trace)):
        p2 = float(np.dot(trace.perturbations[k], trace.perturbations[k]))
        lhs = trace.objectives[k] - trace.objectives[k - 1]
        tol = 1e-9 * (1.0 + abs(trace.objectives[k - 1]))
        rep.checked += 1
        slack = lhs + k1 * p2
        if slack > tol:
            rep.violations.append((k, slack))
    return rep


def verify_cost_to_go(prob: ProblemSpec, trace: IterateTrace, gamma: float,
                      L: float, probe_points) -> InequalityReport:
    """F(x^{k+1}) - F(x) <= kappa2 (||x - x^{k+1}||^2 + ||p_{k+1}||^2) for probes x."""
    k2 = kappa2(gamma, L)
    rep = InequalityReport("cost-to-go", k2, 0)
    probes = [np.asarray(p, dtype=float) for p in probe_points]
    probe_F = [prob.objective(x) for x in probes]
    for k in range(1, len(trace)):
        xk1 = trace.points[k]
        p2 = float(np.dot(trace.perturbations[k], trace.perturbations[k]))
        tol = 1e-9 * (1.0 + abs(trace.objectives[k]))
        for x, Fx in zip(probes, probe_F):
            rep.checked += 1
            rhs = k2 * (float(np.dot(x - xk1, x - xk1)) + p2)
            slack = (trace.objectives[k] - Fx) - rhs
            if slack > tol:
                rep.violations.append((k, slack))
    return rep


def residual(prob: ProblemSpec, x, gamma: float) -> float:
    """Proximal residue dist(x, Prox_g^gamma(x - gamma grad f(x)))."""
    x = np.asarray(x, dtype=float)
    u = x - gamma * prob.loss.gradient(x)
    return prob.penalty.prox_distance(x, u, gamma)


def estimate_error_bound_constant(trace: IterateTrace, S: StationarySetApprox,
                                  window: float):
    """Empirical kappa in dist(x^{k+1}, S) <= kappa ||x^{k+1} - x^k||.

    Only steps with x^{k+1} within `window` of the trace limit count;
    steps with ||p|| below 100 machine epsilons are excluded.
    """
    from .calmness import ModulusEstimate
    x_ref = trace.final
    best = None
    samples = 0
    for k in range(1, len(trace)):
        x = trace.points[k]
        pn = float(np.linalg.norm(trace.perturbations[k]))
        if pn < 1e2 * EPS:
            continue
        if float(np.linalg.norm(x - x_ref)) > window:
            continue
        d = distance_to_set(x, S)
        if d <= 3.0 * S.radius:
            continue  # below the set's certified localization resolution
        ratio = d / pn
        samples += 1
        if best is None or ratio > best[0]:
            best = (ratio, x, trace.perturbations[k])
    if best is None:
        return ModulusEstimate(kappa_hat=math.nan, samples=0,
                               max_ratio_point=None, max_ratio_perturbation=None,
                               note="no informative steps")
    return ModulusEstimate(kappa_hat=best[0], samples=samples,
                           max_ratio_point=best[1], max_ratio_perturbation=best[2])


@dataclass
class RateFit:
    sigma_hat: float
    rho_hat: float
    burn_in: int
    r_squared: float
    n_points: int
    predicted_sigma: float | None = None
    within_prediction: bool | None = None

    def to_json(self):
        return {"sigma_hat": self.sigma_hat, "rho_hat": self.rho_hat,
                "burn_in": self.burn_in, "r_squared": self.r_squared,
                "n_points": self.n_points, "predicted_sigma": self.predicted_sigma,
                "within_prediction": self.within_prediction}


def _log_linear_fit(ks, logs):
    ks = np.asarray(ks, dtype=float)
    logs = np.asarray(logs, dtype=float)
    slope, intercept = np.polyfit(ks, logs, 1)
    pred = slope * ks + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - np.mean(logs)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return math.exp(slope), r2


def fit_linear_rate(trace: IterateTrace, F_star: float, x_bar, burn_in=None,
                    gamma=None, L=None, kappa_hat=None, tail=None) -> RateFit:
    """Geometric factors of F(x^k) - F* and ||x^k - x_bar|| by log-linear fit.

    With gamma, L and a measured error-bound constant, the predicted factor
    sigma = 1/(1 + kappa1/(kappa2 (kappa^2 + 1))) is attached and the fitted
    sigma is compared against it (slack 0.05).
    """
    x_bar = np.asarray(x_bar, dtype=float)
    gaps = np.array(trace.objectives) - F_star
    floor = 1e3 * EPS * (1.0 + abs(F_star))
    usable = [k for k in range(len(trace)) if gaps[k] > floor]
    if burn_in is None:
        burn_in = max(1, len(trace) // 5)
    usable = [k for k in usable if k >= burn_in]
    if tail is not None:
        usable = usable[-tail:]
    if len(usable) < 10:
        raise ValueError("fewer than 10 usable points for the rate fit")
    sigma_hat, r2 = _log_linear_fit(usable, np.log(gaps[usable]))
    dists = np.array([float(np.linalg.norm(trace.points[k] - x_bar)) for k in usable])
    pos = dists > 1e2 * EPS * (1.0 + float(np.linalg.norm(x_bar)))
    if np.count_nonzero(pos) >= 10:
        ks = np.array(usable)[pos]
        rho_hat, _ = _log_linear_fit(ks, np.log(dists[pos]))
    else:
        rho_hat = 0.0
    fit = RateFit(sigma_hat=sigma_hat, rho_hat=rho_hat, burn_in=burn_in,
                  r_squared=r2, n_points=len(usable))
    if gamma is not None and L is not None and kappa_hat is not None:
        k1, k2 = kappa1(gamma, L), kappa2(gamma, L)
        fit.predicted_sigma = 1.0 / (1.0 + k1 / (k2 * (kappa_hat ** 2 + 1.0)))
        fit.within_prediction = bool(sigma_hat <= fit.predicted_sigma + 0.05)
    return fit


def predicted_sigma(gamma: float, L: float, kappa_hat: float) -> float:
    k1, k2 = kappa1(gamma, L), kappa2(gamma, L)
    return 1.0 / (1.0 + k1 / (k2 * (kappa_hat ** 2 + 1.0)))


# ---------------------------------------------------------------------------
# KL property with exponent 1/2

@dataclass
class KLReport:
    kappa_min: float          # minimal feasible kappa over the sample
    violation_fraction: float  # fraction violating at the supplied kappa (0 if none given)
    samples_used: int
    epsilon: float

    def to_json(self):
        return {"kappa_min": self.kappa_min,
                "violation_fraction": self.violation_fraction,
                "samples_used": self.samples_used, "epsilon": self.epsilon}


def subdiff_distance(prob: ProblemSpec, x) -> float:
    """dist(0, grad f(x) + limiting-subdiff g(x)) via the separable sum rule."""
    from .penalties import GroupLasso
    x = np.asarray(x, dtype=float)
    gr = prob.loss.gradient(x)
    if isinstance(prob.penalty, GroupLasso):
        return prob.penalty.subdiff_block_distance(x, -gr)
    total = 0.0
    for i in range(prob.n):
        d = prob.penalty.limiting_subdiff(float(x[i])).distance(float(-gr[i]))
        total += d * d
    return math.sqrt(total)


def check_kl_half(value_fn, subdist_fn, x_bar, epsilon: float, samples: int,
                  seed: int = 0, kappa: float | None = None,
                  gap_floor: float | None = None) -> KLReport:
    """Sample-based check of kappa (F(x)-F(x_bar))^{-1/2} dist(0, dF(x)) >= 1.

    Samples sit on a fixed relative grid scaled by epsilon (same unit-ball
    offsets for every epsilon), so the minimal feasible kappa is comparable
    across radii.  gap_floor guards the gap F(x) - F(x_bar) against
    cancellation noise; pass 0 for exactly-computed objectives to test the
    definitional strict inequality.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    n = x_bar.size
    rng = np.random.default_rng(seed)
    offs = rng.standard_normal((samples, n))
    radii = rng.random(samples) ** (1.0 / n)
    offs = offs / np.linalg.norm(offs, axis=1, keepdims=True) * radii[:, None]
    F0 = value_fn(x_bar)
    kmin = 0.0
    used = 0
    violations = 0
    floor = gap_floor if gap_floor is not None else 1e3 * EPS * (1.0 + abs(F0))
    for o in offs:
        x = x_bar + epsilon * o
        F = value_fn(x)
        if not (F0 + floor < F < math.inf):
            continue
        used += 1
        d = subdist_fn(x)
        gap = math.sqrt(F - F0)
        needed = math.inf if d <= 0.0 else gap / d
        kmin = max(kmin, needed)
        if kappa is not None and (d <= 0.0 or kappa * d / gap < 1.0):
            violations += 1
    frac = violations / used if used else 0.0
    return KLReport(kappa_min=kmin, violation_fraction=frac,
                    samples_used=used, epsilon=epsilon)


def check_kl_half_problem(prob: ProblemSpec, x_bar, epsilon, samples,
                          seed=0, kappa=None) -> KLReport:
    return check_kl_half(prob.objective, lambda x: subdiff_distance(prob, x),
                         x_bar, epsilon, samples, seed, kappa)


# ---------------------------------------------------------------------------
# stationarity

def check_proper_separation(S: StationarySetApprox, prob: ProblemSpec, x_bar,
                            eps: float, tol: float = 1e-8) -> bool:
    """All stationary points within eps of x_bar share the value F(x_bar)."""
    x_bar = np.asarray(x_bar, dtype=float)
    F0 = prob.objective(x_bar)
    for p in S.points:
        if float(np.linalg.norm(p - x_bar)) <= eps:
            if abs(prob.objective(p) - F0) > tol:
                return False
    return True


def classify_stationarity(prob: ProblemSpec, x, tol: float) -> str:
    """'proximal', 'limiting-only', or 'none' for the point x."""
    from .penalties import GroupLasso
    x = np.asarray(x, dtype=float)
    gr = prob.loss.gradient(x)
    if isinstance(prob.penalty, GroupLasso):
        d = prob.penalty.subdiff_block_distance(x, -gr)
        return "proximal" if d <= tol else "none"
    prox_ok = all(prob.penalty.prox_subdiff(float(x[i])).distance(float(-gr[i])) <= tol
                  for i in range(prob.n))
    if prox_ok:
        return "proximal"
    lim_ok = all(prob.penalty.limiting_subdiff(float(x[i])).distance(float(-gr[i])) <= tol
                 for i in range(prob.n))
    return "limiting-only" if lim_ok else "none"
