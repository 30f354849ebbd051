"""Randomised cross-checks of the allocators against the brute-force oracle.

Shared by the ``validate`` CLI command and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .exceptions import ConvergenceError, InfeasibleError
from .precoding import EffectiveGains
from .solver import DualState, PowerModel, QoSConstraints, dinkelbach, dual_solve, solve_cluster

DUAL_RATE_LIMIT = 0.05


def random_instance(rng, n_clusters: int = 2, beta_max: float = 0.1):
    """Gains, QoS and a circuit-power-only model spanning several regimes.

    Strong-user SNR per watt is 30-50 dB; the weak user sits 2-15 dB below.
    The circuit power is drawn over two decades so that both interior and
    full-power EE optima occur.
    """
    a1 = 10.0 ** rng.uniform(3.0, 5.0, n_clusters)
    a2 = a1 * 10.0 ** rng.uniform(-1.5, -0.2, n_clusters)
    beta = rng.uniform(0.0, beta_max, (n_clusters, n_clusters))
    gains = EffectiveGains(np.column_stack([a1, a2]), beta)
    qos = QoSConstraints(r_min=1.0, p_max=float(10.0 ** rng.uniform(-2.0, 0.0)))
    model = PowerModel(p_bb=float(10.0 ** rng.uniform(-1.0, 1.0)), p_rf=0.0, p_ps=0.0, p_pa=0.0)
    return gains, qos, model


@dataclass
class EquivalenceReport:
    """Relative EE deviation ``solver / oracle - 1`` per solved instance."""

    deviations: list = field(default_factory=list)
    infeasible: int = 0
    elapsed_s: float = 0.0

    @property
    def max_abs_deviation(self) -> float:
        return max((abs(d) for d in self.deviations), default=0.0)

    def passed(self, tol: float = 1e-3) -> bool:
        return bool(self.deviations) and self.max_abs_deviation <= tol


def oracle_equivalence(n_instances: int = 200, seed: int = 0, n_clusters: int = 2,
                       inner_solver: str = "kkt") -> EquivalenceReport:
    """Dinkelbach EE versus the system grid search on random instances.

    Instances the oracle finds infeasible are counted and skipped.
    """
    rng = np.random.default_rng(seed)
    report = EquivalenceReport()
    start = time.perf_counter()
    while len(report.deviations) < n_instances:
        gains, qos, model = random_instance(rng, n_clusters)
        pc = model.circuit_power(0, 0)
        try:
            _, ref = oracle.grid_search_system(gains.alpha, gains.beta, qos, model.xi, pc)
        except InfeasibleError:
            report.infeasible += 1
            continue
        alloc = dinkelbach(gains, qos, model, n_rf=0, n_tx=0, inner_solver=inner_solver)
        report.deviations.append(alloc.ee_ratio / ref - 1.0)
    report.elapsed_s = time.perf_counter() - start
    return report


@dataclass
class DualFidelityReport:
    """Subgradient path versus the closed form on single-cluster problems."""

    instances: int = 0
    matched: int = 0
    mismatched: list = field(default_factory=list)  # (index, relative error)
    diverged: list = field(default_factory=list)  # indices

    @property
    def divergence_rate(self) -> float:
        return (len(self.diverged) + len(self.mismatched)) / max(self.instances, 1)


def dual_fidelity(n_instances: int = 500, seed: int = 0, rtol: float = 1e-4) -> DualFidelityReport:
    """Run the dual path without fallback on random feasible cluster problems."""
    rng = np.random.default_rng(seed)
    report = DualFidelityReport()
    while report.instances < n_instances:
        gains, qos, model = random_instance(rng, 1)
        a1, a2 = gains.alpha[0]
        delta = float(rng.uniform(0.0, 0.1)) * qos.p_max
        lam = float(10.0 ** rng.uniform(-1.0, 3.0)) if rng.uniform() < 0.8 else 0.0
        try:
            ref = solve_cluster(a1, a2, delta, lam * model.xi, qos.r_min, qos.p_max)
        except InfeasibleError:
            continue
        k = report.instances
        report.instances += 1
        state = DualState.zeros(1)
        try:
            p1, p2, _ = dual_solve(0, lam, delta, gains, qos, state, model.xi, fallback=False)
        except ConvergenceError:
            report.diverged.append(k)
            continue
        err = max(abs(p1 - ref[0]), abs(p2 - ref[1])) / max(ref[0] + ref[1], 1e-300)
        if err <= rtol:
            report.matched += 1
        else:
            report.mismatched.append((k, err))
    return report


def format_report(eq: EquivalenceReport, dual: DualFidelityReport | None = None,
                  tol: float = 1e-3) -> str:
    lines = [
        f"oracle equivalence: {len(eq.deviations)} instances, "
        f"max |EE deviation| = {eq.max_abs_deviation:.3e} "
        f"({'PASS' if eq.passed(tol) else 'FAIL'} at {tol:g}), {eq.infeasible} infeasible skipped, "
        f"{eq.elapsed_s:.1f} s",
    ]
    if dual is not None:
        lines.append(
            f"dual path: {dual.matched}/{dual.instances} match closed form within 1e-4, "
            f"{len(dual.diverged)} diverged, {len(dual.mismatched)} mismatched "
            f"(rate {dual.divergence_rate:.2%}, limit {DUAL_RATE_LIMIT:.0%}: "
            f"{'PASS' if dual.divergence_rate < DUAL_RATE_LIMIT else 'FAIL'})"
        )
    lines.append(f"overall: {'PASS' if report_passed(eq, dual, tol) else 'FAIL'}")
    return "\n".join(lines)


def report_passed(eq: EquivalenceReport, dual: DualFidelityReport | None = None,
                  tol: float = 1e-3) -> bool:
    return eq.passed(tol) and (dual is None or dual.divergence_rate < DUAL_RATE_LIMIT)


__all__ = ["random_instance", "oracle_equivalence", "dual_fidelity", "format_report", "report_passed",
           "EquivalenceReport", "DualFidelityReport"]
