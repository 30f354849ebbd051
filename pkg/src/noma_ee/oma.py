"""TDMA baseline: the two users of a cluster take equal, disjoint time slots.

User ``i`` of cluster ``l`` transmits at ``P_li`` during its half slot, so its
time-averaged rate is ``0.5 log2(1 + g P_li)`` and the time-averaged radiated
power is ``0.5 sum(P)``. Circuit power is drawn in both slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigError, ConvergenceError, InfeasibleError
from .precoding import COND_MAX, EffectiveGains, build_precoder, effective_gains
from .solver import (
    DINKELBACH_TOL,
    INNER_TOL,
    LN2,
    MAX_OUTER,
    MAX_SWEEPS,
    PowerModel,
    QoSConstraints,
    SolverDiagnostics,
)
from .validation import check_gains, check_powers

OMA_MODES = ("per-slot", "reuse")


@dataclass
class OmaAllocation:
    p: np.ndarray
    rates: np.ndarray
    ee: float
    se: float
    lambda_star: float
    ee_ratio: float
    circuit_power: float
    diagnostics: SolverDiagnostics = field(default_factory=SolverDiagnostics)


def oma_gains(channels, analog, sigma2, mode="per-slot", cond_max=COND_MAX) -> EffectiveGains:
    """Slot gains for the TDMA baseline.

    ``per-slot``: ZF is recomputed over the strong users for slot 1 and over
    the weak users for slot 2, so nobody sees inter-cluster interference and
    ``beta`` is zero. ``reuse``: the NOMA precoder is kept and weak users see
    leakage from the other clusters' weak-user transmissions through ``beta``.
    """
    channels = np.asarray(channels, dtype=complex)
    if mode == "per-slot":
        alpha = np.empty((channels.shape[0], 2))
        for i in (0, 1):
            pre = build_precoder(channels[:, i, :], analog, cond_max)
            g = channels[:, i, :] @ pre.beams()
            alpha[:, i] = np.abs(np.diag(g)) ** 2 / sigma2
        return EffectiveGains(alpha, None)
    if mode == "reuse":
        pre = build_precoder(channels[:, 0, :], analog, cond_max)
        return effective_gains(channels, pre, sigma2, check_ordering=False)
    raise ConfigError(f"unknown OMA precoding mode {mode!r}")


def oma_rates(p, gains: EffectiveGains) -> np.ndarray:
    p = check_powers(p, gains.n_clusters)
    a = gains.alpha
    interf = gains.beta @ p[:, 1]
    r = np.empty_like(p)
    r[:, 0] = 0.5 * np.log2(1.0 + a[:, 0] * p[:, 0])
    r[:, 1] = 0.5 * np.log2(1.0 + p[:, 1] / (interf + 1.0 / a[:, 1]))
    return r


def oma_power_consumed(p, model: PowerModel, n_rf: int, n_tx: int) -> float:
    return 0.5 * model.xi * float(np.sum(p)) + model.circuit_power(n_rf, n_tx)


def _slot_power(g, lam_xi, r_min, p_max):
    """Best half-slot power for effective SNR gain ``g``."""
    p_lo = (2.0 ** (2.0 * r_min) - 1.0) / g
    if p_lo > p_max * (1.0 + 1e-12):
        raise InfeasibleError(f"half-slot rate r_min={r_min} needs {p_lo:.4g} W > p_max")
    if lam_xi <= 0:
        return p_max
    return min(max(1.0 / (lam_xi * LN2) - 1.0 / g, p_lo), p_max)


def _oma_block(lam_xi, gains, qos, tol, max_sweeps=MAX_SWEEPS):
    a = gains.alpha
    L = gains.n_clusters
    P = np.empty((L, 2))
    for l in range(L):
        P[l, 0] = _slot_power(a[l, 0], lam_xi, qos.r_min, qos.p_max)
    worst = qos.p_max * gains.beta.sum(axis=1)
    # weak slots start at r_min against worst-case leakage, as in the NOMA solver
    P[:, 1] = (2.0 ** (2.0 * qos.r_min) - 1.0) * (worst + 1.0 / a[:, 1])
    if np.any(P[:, 1] > qos.p_max * (1.0 + 1e-12)):
        raise InfeasibleError("no feasible starting point for the weak-user slots")
    coupled = L > 1 and np.any(gains.beta > 0)
    for sweeps in range(1, max_sweeps + 1):
        change = 0.0
        for l in range(L):
            g = 1.0 / (float(gains.beta[l] @ P[:, 1]) + 1.0 / a[l, 1])
            new = _slot_power(g, lam_xi, qos.r_min, qos.p_max)
            change = max(change, abs(new - P[l, 1]))
            P[l, 1] = new
        if not coupled or change < tol * qos.p_max:
            return P, sweeps
    raise ConvergenceError(f"OMA weak-slot sweeps did not settle in {max_sweeps} sweeps")


def oma_solve(gains: EffectiveGains, qos: QoSConstraints, model: PowerModel | None = None,
              *, n_rf: int, n_tx: int, bandwidth: float = 1.0, tol: float = DINKELBACH_TOL,
              max_outer: int = MAX_OUTER, inner_tol: float = INNER_TOL,
              lam: float | None = None) -> OmaAllocation:
    """EE-optimal TDMA powers by the same Dinkelbach scheme as the NOMA solver.

    Passing ``lam`` solves the subtractive problem at that fixed parameter
    instead (``lam=0`` gives the max-SE TDMA powers).
    """
    model = PowerModel() if model is None else model
    gains = check_gains(gains)
    pc = model.circuit_power(n_rf, n_tx)
    diag = SolverDiagnostics(dual_var_count=0)
    cur = 0.0 if lam is None else float(lam)
    for k in range(max_outer):
        P, sweeps = _oma_block(cur * model.xi, gains, qos, inner_tol)
        diag.inner_iters.append(sweeps)
        diag.lambda_trace.append(cur)
        num = float(oma_rates(P, gains).sum())
        den = oma_power_consumed(P, model, n_rf, n_tx)
        eps_star = num - cur * den
        diag.eps_trace.append(eps_star)
        diag.outer_iters = k + 1
        if lam is not None or eps_star <= tol:
            R = oma_rates(P, gains)
            ratio = num / den
            return OmaAllocation(p=P, rates=R, ee=bandwidth * ratio, se=num,
                                 lambda_star=ratio, ee_ratio=ratio, circuit_power=pc,
                                 diagnostics=diag)
        cur = num / den
    raise ConvergenceError(f"OMA Dinkelbach did not converge in {max_outer} iterations",
                           diag.eps_trace)


class OmaEEAllocator(BaseEstimator):
    """Estimator front end for :func:`oma_solve` (``max_se=True`` fixes lambda at 0)."""

    def __init__(self, r_min=1.0, p_max=1.0, power_model=None, n_rf=8, n_tx=100,
                 bandwidth_hz=50e6, max_se=False, tol=DINKELBACH_TOL):
        self.r_min = r_min
        self.p_max = p_max
        self.power_model = power_model
        self.n_rf = n_rf
        self.n_tx = n_tx
        self.bandwidth_hz = bandwidth_hz
        self.max_se = max_se
        self.tol = tol

    def fit(self, X, y=None, beta=None):
        gains = check_gains(X, beta)
        model = self.power_model if self.power_model is not None else PowerModel()
        alloc = oma_solve(gains, QoSConstraints(self.r_min, self.p_max), model,
                          n_rf=self.n_rf, n_tx=self.n_tx, bandwidth=self.bandwidth_hz,
                          tol=self.tol, lam=0.0 if self.max_se else None)
        self.gains_ = gains
        self.allocation_ = alloc
        self.power_ = alloc.p
        self.rates_ = alloc.rates
        self.ee_ = alloc.ee
        self.se_ = alloc.se
        self.lambda_ = alloc.lambda_star
        return self

    def score(self, X=None, y=None, beta=None):
        gains = self.gains_ if X is None else check_gains(X, beta)
        model = self.power_model if self.power_model is not None else PowerModel()
        return self.bandwidth_hz * float(oma_rates(self.power_, gains).sum()) / \
            oma_power_consumed(self.power_, model, self.n_rf, self.n_tx)
