"""Energy-efficient NOMA power allocation.

Outer loop: Dinkelbach iteration on the EE ratio. Inner loop: block
coordinate sweeps over clusters, each cluster solving its two-user problem
with the other clusters' powers frozen. The per-cluster problem is convex in
the rate variables ``(R1, R2)`` and is solved either in closed form from its
KKT conditions (``"kkt"``, default) or by projected subgradient descent on
the Lagrange dual (``"dual"``).

Rates are in bit/s/Hz and powers in watts throughout; ``ee`` fields are in
bit/J (rate ratio times bandwidth).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from sklearn.base import BaseEstimator

from .exceptions import ConfigError, ConvergenceError, InfeasibleError
from .precoding import EffectiveGains
from .validation import check_gains, check_powers

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

DINKELBACH_TOL = 1e-6
INNER_TOL = 1e-6
KKT_TOL = 1e-8
MAX_OUTER = 50
MAX_SWEEPS = 500
DUAL_MAX_ITER = 20000
DUAL_STEP = 1.0


@dataclass(frozen=True)
class PowerModel:
    """Circuit power figures (watts) and PA inefficiency ``xi``."""

    p_bb: float = 0.200
    p_rf: float = 0.160
    p_ps: float = 0.020
    p_pa: float = 0.040
    xi: float = 1.0 / 0.38

    def __post_init__(self):
        for name in ("p_bb", "p_rf", "p_ps", "p_pa"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.xi < 1:
            raise ConfigError(f"xi must be >= 1, got {self.xi!r}")

    def circuit_power(self, n_rf: int, n_tx: int) -> float:
        return self.p_bb + n_rf * self.p_rf + n_rf * n_tx * self.p_ps + n_tx * self.p_pa


@dataclass(frozen=True)
class QoSConstraints:
    r_min: float = 1.0
    p_max: float = 1.0

    def __post_init__(self):
        if self.r_min < 0:
            raise ConfigError(f"r_min must be >= 0, got {self.r_min!r}")
        if not self.p_max > 0:
            raise ConfigError(f"p_max must be > 0, got {self.p_max!r}")


@dataclass
class DualState:
    """Multipliers for every cluster plus the subgradient step schedule.

    The step at iteration ``s`` is ``step0 / sqrt(1 + s)``; the power
    multiplier's step is additionally divided by ``p_max**2`` so that both
    updates are dimensionless.
    """

    mu: np.ndarray
    theta: np.ndarray
    step0: float = DUAL_STEP
    max_iter: int = DUAL_MAX_ITER
    tol: float = KKT_TOL
    iterations: int = 0
    fallbacks: int = 0

    @classmethod
    def zeros(cls, n_clusters: int, **kwargs) -> "DualState":
        return cls(mu=np.zeros((n_clusters, 2)), theta=np.zeros(n_clusters), **kwargs)

    def mu_step(self, s: int) -> float:
        return self.step0 / math.sqrt(1.0 + s)

    def theta_step(self, s: int, p_max: float) -> float:
        return self.step0 / math.sqrt(1.0 + s) / (p_max * p_max)


@dataclass
class SolverDiagnostics:
    outer_iters: int = 0
    inner_iters: list = field(default_factory=list)
    dual_iters: int = 0
    dual_var_count: int = 3
    dual_fallbacks: int = 0
    objective_trace: list = field(default_factory=list)
    lambda_trace: list = field(default_factory=list)
    eps_trace: list = field(default_factory=list)
    power_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "outer_iters": self.outer_iters,
            "inner_iters": list(self.inner_iters),
            "dual_iters": self.dual_iters,
            "dual_var_count": self.dual_var_count,
            "dual_fallbacks": self.dual_fallbacks,
            "objective_trace": [list(map(float, t)) for t in self.objective_trace],
            "lambda_trace": list(map(float, self.lambda_trace)),
            "eps_trace": list(map(float, self.eps_trace)),
            "power_trace": [np.asarray(p, dtype=float).tolist() for p in self.power_trace],
        }


@dataclass
class PowerAllocation:
    p: np.ndarray
    rates: np.ndarray
    ee: float
    se: float
    lambda_star: float
    ee_ratio: float
    circuit_power: float
    diagnostics: SolverDiagnostics = field(default_factory=SolverDiagnostics)

    @property
    def total_power(self) -> float:
        return float(self.p.sum())


# -- rate / power bookkeeping ------------------------------------------------

def interference(p, gains: EffectiveGains) -> np.ndarray:
    """Inter-cluster interference ``sum_{j != l} beta[l, j] (P_j1 + P_j2)`` per cluster."""
    return gains.beta @ np.asarray(p, dtype=float).sum(axis=1)


def rates(p, gains: EffectiveGains) -> np.ndarray:
    """Achievable rates (bit/s/Hz) of every user, shape ``(L, 2)``."""
    p = check_powers(p, gains.n_clusters)
    a = gains.alpha
    r = np.empty_like(p)
    r[:, 0] = np.log2(1.0 + a[:, 0] * p[:, 0])
    r[:, 1] = np.log2(1.0 + p[:, 1] / (p[:, 0] + interference(p, gains) + 1.0 / a[:, 1]))
    return r


def sic_margin(p, gains: EffectiveGains) -> np.ndarray:
    """Strong user's SINR on the weak signal minus the weak user's own SINR.

    Evaluated in the factored form
    ``P2 (1/a2 - 1/a1 + I) / ((P1 + 1/a1)(P1 + I + 1/a2))`` so the sign is
    exact whenever the ordering holds.
    """
    p = check_powers(p, gains.n_clusters)
    inv1 = 1.0 / gains.alpha[:, 0]
    inv2 = 1.0 / gains.alpha[:, 1]
    interf = interference(p, gains)
    return p[:, 1] * (inv2 - inv1 + interf) / ((p[:, 0] + inv1) * (p[:, 0] + interf + inv2))


def power_consumed(p, model: PowerModel, n_rf: int, n_tx: int) -> float:
    """Total consumption ``xi * sum(P) + P_C`` in watts."""
    return model.xi * float(np.sum(p)) + model.circuit_power(n_rf, n_tx)


def energy_efficiency(p, gains: EffectiveGains, model: PowerModel, bandwidth: float = 1.0,
                      *, n_rf: int, n_tx: int) -> float:
    """``bandwidth * sum(R) / (xi * sum(P) + P_C)``; bandwidth 1 gives the raw ratio."""
    return bandwidth * float(rates(p, gains).sum()) / power_consumed(p, model, n_rf, n_tx)


def subtractive_objective(p, gains: EffectiveGains, lam_xi: float) -> float:
    """``sum(R) - lambda * xi * sum(P)``, the objective the block sweeps ascend."""
    return float(rates(p, gains).sum()) - lam_xi * float(np.sum(p))


# -- single cluster ------------------------------------------------------------

def _convexity_gap(a1, a2, delta):
    gap = 1.0 / a2 - 1.0 / a1 + delta
    if gap < -1e-12 * max(1.0 / a2, 1.0 / a1):
        raise ConfigError(f"strong/weak ordering violated (1/a2 - 1/a1 + dP = {gap:.3g})")
    return max(gap, 0.0)


def solve_cluster(a1, a2, delta, lam_xi, r_min, p_max):
    """Closed-form optimum of one cluster's subtractive problem.

    With the weak user pinned at ``r_min`` (never worse, since extra weak
    rate costs more power than the same strong rate), the problem reduces to
    the sum rate ``S``: maximise ``S - lam_xi 2^S / a1`` over
    ``2^(2 r_min) <= 2^S <= a1 (p_max + delta + 1/a2 - A 2^r_min)``.
    Returns ``(P1, P2)``.
    """
    inv1 = 1.0 / a1
    inv2 = 1.0 / a2
    gap = _convexity_gap(a1, a2, delta)
    c = 2.0 ** r_min
    lo = c * c
    hi = a1 * (p_max + delta + inv2 - gap * c)
    if hi < lo * (1.0 - 1e-12):
        raise InfeasibleError(
            f"minimum power {(lo / a1 + gap * c - delta - inv2):.4g} W exceeds p_max={p_max:.4g} W"
        )
    # unconstrained optimum a1 / (lam_xi ln2), compared without dividing
    x = hi if lam_xi * LN2 * hi <= a1 else a1 / (lam_xi * LN2)
    x = min(max(x, lo), max(hi, lo))
    p1 = (x / c - 1.0) * inv1
    p2 = (c - 1.0) * (p1 + delta + inv2)
    return p1, p2


def kkt_residual(p1, p2, a1, a2, delta, lam_xi, r_min, p_max, act_tol=1e-9):
    """KKT residual of a candidate ``(P1, P2)`` for one cluster.

    Multipliers for the active constraints are recovered by non-negative
    least squares on the two stationarity equations in ``(R1, R2)``. The
    residual is the stationarity misfit plus primal violations (rates in
    bits, power relative to ``p_max``).
    """
    gap = 1.0 / a2 - 1.0 / a1 + delta
    r1 = math.log2(1.0 + a1 * p1)
    r2 = math.log2(1.0 + p2 / (p1 + delta + 1.0 / a2))
    f = p1 + p2
    e = 2.0 ** (r1 + r2) / a1
    g = gap * 2.0 ** r2
    M = np.array([[1.0, 0.0, -LN2 * e], [0.0, 1.0, -LN2 * (e + g)]])
    b = np.array([LN2 * e * lam_xi - 1.0, LN2 * (e + g) * lam_xi - 1.0])
    active = [abs(r1 - r_min) <= act_tol * max(1.0, r_min),
              abs(r2 - r_min) <= act_tol * max(1.0, r_min),
              abs(f - p_max) <= act_tol * p_max]
    cols = [k for k in range(3) if active[k]]
    if cols:
        # scale the power multiplier column to O(1) before solving
        scale = np.ones(3)
        scale[2] = p_max
        Ma = M[:, cols] * scale[cols]
        _, stat = nnls(Ma, b)
    else:
        stat = float(np.linalg.norm(b))
    primal = max(r_min - r1, r_min - r2, (f - p_max) / p_max, 0.0)
    return float(stat + primal)


def inner_cluster_solve(l, lam, p_hat, gains: EffectiveGains, qos: QoSConstraints,
                        xi: float = 1.0 / 0.38, *, certify: bool = False):
    """Optimal ``(P_l1, P_l2)`` with all other clusters frozen at ``p_hat``."""
    p_hat = np.asarray(p_hat, dtype=float)
    delta = float(interference(p_hat, gains)[l])
    a1, a2 = gains.alpha[l]
    p1, p2 = solve_cluster(a1, a2, delta, lam * xi, qos.r_min, qos.p_max)
    if certify:
        res = kkt_residual(p1, p2, a1, a2, delta, lam * xi, qos.r_min, qos.p_max)
        if res > KKT_TOL:
            raise ConvergenceError(f"cluster {l}: KKT residual {res:.3g} above {KKT_TOL}")
    return p1, p2


# -- dual subgradient path ----------------------------------------------------

def lagrangian_argmax(mu1, mu2, theta, a1, a2, delta, lam_xi, p_max):
    """Powers maximising the cluster Lagrangian for fixed multipliers.

    In the interior this is the familiar closed form
    ``P1 = (1+mu1) A / (mu2 - mu1) - 1/a1`` and
    ``P2 = (1+mu2) / ((xi lam + theta) ln 2) - (1+mu2) A / (mu2 - mu1)``.
    When either power would go negative the maximiser sits on ``R2 = 0`` or
    ``R1 = 0``, and those faces are solved exactly.
    """
    c = max(lam_xi + theta, 1e-9 / p_max)
    inv1 = 1.0 / a1
    inv2 = 1.0 / a2
    gap = max(inv2 - inv1 + delta, 0.0)
    d = mu2 - mu1
    if d > 0 and gap > 0:
        p1 = (1.0 + mu1) * gap / d - inv1
        p2 = (1.0 + mu2) / (c * LN2) - (1.0 + mu2) * gap / d
        if p1 >= 0 and p2 >= 0:
            return p1, p2
    s = max(0.0, math.log2((1.0 + mu1) * a1 / (c * LN2)))
    if d <= 0:
        t = 0.0
    elif gap <= 0:
        t = math.inf
    else:
        t = max(0.0, math.log2(d / (c * gap * LN2)))
    if t <= s:
        p1 = (2.0 ** (s - t) - 1.0) * inv1
        return p1, (2.0 ** t - 1.0) * (p1 + delta + inv2)
    u = max(0.0, math.log2((1.0 + mu2) / (c * LN2 * (inv2 + delta))))
    return 0.0, (2.0 ** u - 1.0) * (delta + inv2)


def _dual_residual(r1, r2, f, mu1, mu2, theta, r_min, p_max):
    """Largest KKT violation, slackness terms scaled by their multiplier size."""
    return max(
        r_min - r1, r_min - r2, (f - p_max) / p_max,
        abs(mu1 * (r1 - r_min)) / (1.0 + mu1), abs(mu2 * (r2 - r_min)) / (1.0 + mu2),
        abs(theta * (p_max - f)) / (1.0 + theta * p_max),
        0.0,
    )


def dual_solve(l, lam, delta, gains: EffectiveGains, qos: QoSConstraints, state: DualState,
               xi: float = 1.0 / 0.38, *, fallback: bool = True):
    """Projected subgradient descent on cluster ``l``'s Lagrange dual.

    Multipliers are warm-started from ``state`` and written back. Steps are
    multiplied by ``1 + xi lam p_max``, the energy price of a full power
    budget in bits, since the rate multipliers scale with it. Returns
    ``(P1, P2, state)``. If the residual does not reach ``state.tol`` within
    ``state.max_iter`` iterations the robust closed-form solution is returned
    instead (when ``fallback``) and ``state.fallbacks`` is incremented.
    """
    a1, a2 = gains.alpha[l]
    _convexity_gap(a1, a2, delta)
    lam_xi = lam * xi
    r_min, p_max = qos.r_min, qos.p_max
    mu1, mu2 = state.mu[l]
    theta = state.theta[l]
    if lam_xi <= 0 and theta <= 0:
        theta = 1.0 / (LN2 * p_max)
    inv2 = 1.0 / a2
    price = 1.0 + lam_xi * p_max
    p1 = p2 = 0.0
    converged = False
    for s in range(state.max_iter):
        p1, p2 = lagrangian_argmax(mu1, mu2, theta, a1, a2, delta, lam_xi, p_max)
        r1 = math.log2(1.0 + a1 * p1)
        r2 = math.log2(1.0 + p2 / (p1 + delta + inv2))
        f = p1 + p2
        state.iterations += 1
        if _dual_residual(r1, r2, f, mu1, mu2, theta, r_min, p_max) <= state.tol:
            converged = True
            break
        step = price * state.mu_step(s)
        mu1 = max(0.0, mu1 - step * (r1 - r_min))
        mu2 = max(0.0, mu2 - step * (r2 - r_min))
        theta = max(0.0, theta - price * state.theta_step(s, p_max) * (p_max - f))
    state.mu[l] = (mu1, mu2)
    state.theta[l] = theta
    if not converged:
        if not fallback:
            raise ConvergenceError(f"cluster {l}: dual subgradient did not converge")
        state.fallbacks += 1
        logger.debug("cluster %d: dual path fell back to the closed form", l)
        p1, p2 = solve_cluster(a1, a2, delta, lam_xi, r_min, p_max)
    return p1, p2, state


# -- block coordinate sweeps and Dinkelbach -----------------------------------

def initial_feasible_power(gains: EffectiveGains, qos: QoSConstraints) -> np.ndarray:
    """Every cluster at full power, weak user sized for worst-case leakage.

    Each cluster takes its sum-rate optimum with every other cluster at
    ``p_max``. Since that is exactly the starting state, the assumption holds
    and the point is feasible. Starting from the top also makes the sweeps
    monotone: cluster powers can only fall, so nobody's interference grows.
    """
    worst = qos.p_max * gains.beta.sum(axis=1)
    p = np.empty((gains.n_clusters, 2))
    for l in range(gains.n_clusters):
        try:
            p[l] = solve_cluster(gains.alpha[l, 0], gains.alpha[l, 1], float(worst[l]), 0.0,
                                 qos.r_min, qos.p_max)
        except InfeasibleError as err:
            raise InfeasibleError(f"no feasible starting point for cluster {l}: {err}",
                                  cluster=l) from err
    return p


def block_iteration(lam, gains: EffectiveGains, qos: QoSConstraints, xi: float = 1.0 / 0.38,
                    *, inner_solver: str = "kkt", tol: float = INNER_TOL,
                    max_sweeps: int = MAX_SWEEPS, dual_state: DualState | None = None):
    """Sweep the clusters until no power moves by more than ``tol * p_max``.

    Returns ``(P, diagnostics)``; ``diagnostics.objective_trace[0]`` holds the
    subtractive objective after the initial point and after every cluster
    update.
    """
    gains = check_gains(gains)
    if inner_solver not in ("kkt", "dual"):
        raise ConfigError(f"unknown inner solver {inner_solver!r}")
    L = gains.n_clusters
    lam_xi = lam * xi
    P = initial_feasible_power(gains, qos)
    coupled = L > 1 and np.any(gains.beta > 0)
    if inner_solver == "dual" and dual_state is None:
        dual_state = DualState.zeros(L)
    diag = SolverDiagnostics()
    trace = [subtractive_objective(P, gains, lam_xi)]
    alpha = gains.alpha
    beta = gains.beta
    r_min, p_max = qos.r_min, qos.p_max
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        change = 0.0
        for l in range(L):
            delta = float(beta[l] @ (P[:, 0] + P[:, 1]))
            if inner_solver == "kkt":
                p1, p2 = solve_cluster(alpha[l, 0], alpha[l, 1], delta, lam_xi, r_min, p_max)
            else:
                p1, p2, dual_state = dual_solve(l, lam, delta, gains, qos, dual_state, xi)
            change = max(change, abs(p1 - P[l, 0]), abs(p2 - P[l, 1]))
            P[l, 0], P[l, 1] = p1, p2
            trace.append(subtractive_objective(P, gains, lam_xi))
        if not coupled or change < tol * p_max:
            break
    else:
        raise ConvergenceError(f"block iteration did not settle in {max_sweeps} sweeps", trace)
    diag.inner_iters.append(sweeps)
    diag.objective_trace.append(trace)
    if dual_state is not None:
        diag.dual_iters = dual_state.iterations
        diag.dual_fallbacks = dual_state.fallbacks
    return P, diag


def _allocation(P, gains, model, n_rf, n_tx, bandwidth, lambda_star, diag):
    R = rates(P, gains)
    pc = model.circuit_power(n_rf, n_tx)
    ratio = float(R.sum()) / (model.xi * float(P.sum()) + pc)
    return PowerAllocation(
        p=P, rates=R, ee=bandwidth * ratio, se=float(R.sum()), lambda_star=lambda_star,
        ee_ratio=ratio, circuit_power=pc, diagnostics=diag,
    )


def dinkelbach(gains: EffectiveGains, qos: QoSConstraints, model: PowerModel | None = None,
               *, n_rf: int, n_tx: int, bandwidth: float = 1.0, tol: float = DINKELBACH_TOL,
               max_outer: int = MAX_OUTER, inner_solver: str = "kkt",
               inner_tol: float = INNER_TOL) -> PowerAllocation:
    """EE-optimal powers by Dinkelbach's method.

    Starts at ``lambda = 0`` and, after each inner solve, sets ``lambda`` to
    the EE ratio just achieved; stops once
    ``eps* = sum(R) - lambda (xi sum(P) + P_C)`` drops to ``tol``.
    ``lambda_star`` of the result is the EE ratio of the returned powers.
    """
    model = PowerModel() if model is None else model
    gains = check_gains(gains)
    pc = model.circuit_power(n_rf, n_tx)
    lam = 0.0
    diag = SolverDiagnostics()
    dual_state = DualState.zeros(gains.n_clusters) if inner_solver == "dual" else None
    for k in range(max_outer):
        P, inner = block_iteration(lam, gains, qos, model.xi, inner_solver=inner_solver,
                                   tol=inner_tol, dual_state=dual_state)
        diag.inner_iters.extend(inner.inner_iters)
        diag.objective_trace.extend(inner.objective_trace)
        diag.dual_iters = inner.dual_iters
        diag.dual_fallbacks = inner.dual_fallbacks
        diag.lambda_trace.append(lam)
        diag.power_trace.append(P.copy())
        num = float(rates(P, gains).sum())
        den = model.xi * float(P.sum()) + pc
        eps_star = num - lam * den
        diag.eps_trace.append(eps_star)
        diag.outer_iters = k + 1
        if eps_star <= tol:
            return _allocation(P, gains, model, n_rf, n_tx, bandwidth, num / den, diag)
        lam = num / den
    raise ConvergenceError(f"Dinkelbach did not converge in {max_outer} iterations",
                           diag.eps_trace)


def max_se(gains: EffectiveGains, qos: QoSConstraints, model: PowerModel | None = None,
           *, n_rf: int, n_tx: int, bandwidth: float = 1.0, inner_solver: str = "kkt",
           inner_tol: float = INNER_TOL) -> PowerAllocation:
    """Sum-rate maximising powers (the subtractive problem at ``lambda = 0``)."""
    model = PowerModel() if model is None else model
    P, diag = block_iteration(0.0, gains, qos, model.xi, inner_solver=inner_solver,
                              tol=inner_tol)
    diag.outer_iters = 1
    diag.lambda_trace.append(0.0)
    diag.power_trace.append(P.copy())
    alloc = _allocation(P, check_gains(gains), model, n_rf, n_tx, bandwidth, 0.0, diag)
    alloc.lambda_star = alloc.ee_ratio
    return alloc


# -- estimator front end --------------------------------------------------------

class NomaEEAllocator(BaseEstimator):
    """EE-maximising NOMA power allocation as an estimator.

    ``fit(gains)`` takes an :class:`EffectiveGains` (or an ``(L, 2)`` alpha
    array plus ``beta=``) and stores the result in ``allocation_``, with the
    usual shortcuts ``power_``, ``rates_``, ``ee_`` (bit/J) and ``lambda_``.
    """

    objective = "ee"

    def __init__(self, r_min=1.0, p_max=1.0, power_model=None, n_rf=8, n_tx=100,
                 bandwidth_hz=50e6, inner_solver="kkt", tol=DINKELBACH_TOL,
                 max_outer=MAX_OUTER):
        self.r_min = r_min
        self.p_max = p_max
        self.power_model = power_model
        self.n_rf = n_rf
        self.n_tx = n_tx
        self.bandwidth_hz = bandwidth_hz
        self.inner_solver = inner_solver
        self.tol = tol
        self.max_outer = max_outer

    def _solve(self, gains, qos, model):
        return dinkelbach(gains, qos, model, n_rf=self.n_rf, n_tx=self.n_tx,
                          bandwidth=self.bandwidth_hz, tol=self.tol,
                          max_outer=self.max_outer, inner_solver=self.inner_solver)

    def fit(self, X, y=None, beta=None):
        gains = check_gains(X, beta)
        qos = QoSConstraints(self.r_min, self.p_max)
        model = self.power_model if self.power_model is not None else PowerModel()
        alloc = self._solve(gains, qos, model)
        self.gains_ = gains
        self.allocation_ = alloc
        self.power_ = alloc.p
        self.rates_ = alloc.rates
        self.ee_ = alloc.ee
        self.se_ = alloc.se
        self.lambda_ = alloc.lambda_star
        self.diagnostics_ = alloc.diagnostics
        return self

    def predict(self, X=None, beta=None):
        """Per-user rates of the fitted powers on ``X`` (defaults to the fit gains)."""
        gains = self.gains_ if X is None else check_gains(X, beta)
        return rates(self.power_, gains)

    def score(self, X=None, y=None, beta=None):
        """EE in bit/J of the fitted powers on ``X``."""
        gains = self.gains_ if X is None else check_gains(X, beta)
        model = self.power_model if self.power_model is not None else PowerModel()
        return energy_efficiency(self.power_, gains, model, self.bandwidth_hz,
                                 n_rf=self.n_rf, n_tx=self.n_tx)


class MaxSEAllocator(NomaEEAllocator):
    """Same interface, sum-rate objective (the ``MaxSE`` baseline)."""

    objective = "se"

    def _solve(self, gains, qos, model):
        return max_se(gains, qos, model, n_rf=self.n_rf, n_tx=self.n_tx,
                      bandwidth=self.bandwidth_hz, inner_solver=self.inner_solver)
