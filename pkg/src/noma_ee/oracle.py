"""Brute-force references for the power allocators.

Everything here re-derives rates straight from the SINR definitions and
searches power grids; nothing is imported from the solver modules, so the
two routes stay independent.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import ConfigError, InfeasibleError

COARSE_DIVISIONS = 200
REFINE_FACTOR = 10
SYSTEM_COARSE_DIVISIONS = 40


def _weak_sinr(p1, p2, a2, interf):
    return p2 / (p1 + interf + 1.0 / a2)


def cluster_objective(p1, p2, a1, a2, delta, lam_xi):
    """``R1 + R2 - lam_xi (P1 + P2)`` for one cluster (array friendly)."""
    r1 = np.log2(1.0 + a1 * p1)
    r2 = np.log2(1.0 + _weak_sinr(p1, p2, a2, delta))
    return r1 + r2 - lam_xi * (p1 + p2), r1, r2


def _cluster_grid(lo1, hi1, lo2, hi2, step, a1, a2, delta, lam_xi, r_min, p_max):
    g1 = np.arange(lo1, hi1 + 0.5 * step, step)
    g2 = np.arange(lo2, hi2 + 0.5 * step, step)
    P1, P2 = np.meshgrid(np.clip(g1, 0, p_max), np.clip(g2, 0, p_max), indexing="ij")
    obj, r1, r2 = cluster_objective(P1, P2, a1, a2, delta, lam_xi)
    ok = (P1 + P2 <= p_max) & (r1 >= r_min) & (r2 >= r_min)
    if not ok.any():
        return None
    obj = np.where(ok, obj, -np.inf)
    k = np.unravel_index(int(np.argmax(obj)), obj.shape)
    return float(P1[k]), float(P2[k]), float(obj[k])


def grid_search_cluster(lam, delta, alpha, qos, xi=1.0, resolution=None, refine_levels=1):
    """Exhaustive search of one cluster's subtractive problem in ``(P1, P2)``.

    A grid of spacing ``resolution`` (default ``p_max / 200``) covers the
    feasible triangle; each refinement level re-grids a window of one coarse
    step around the incumbent at ten times finer spacing. Returns
    ``(P1, P2, objective)``.
    """
    a1, a2 = float(alpha[0]), float(alpha[1])
    p_max, r_min = qos.p_max, qos.r_min
    step = p_max / COARSE_DIVISIONS if resolution is None else float(resolution)
    if step <= 0:
        raise ConfigError("resolution must be > 0")
    lam_xi = lam * xi
    best = _cluster_grid(0.0, p_max, 0.0, p_max, step, a1, a2, delta, lam_xi, r_min, p_max)
    if best is None:
        raise InfeasibleError("no grid point meets the QoS and power constraints")
    for _ in range(refine_levels):
        fine = step / REFINE_FACTOR
        cand = _cluster_grid(best[0] - step, best[0] + step, best[1] - step, best[1] + step,
                             fine, a1, a2, delta, lam_xi, r_min, p_max)
        if cand is not None and cand[2] >= best[2]:
            best = cand
        step = fine
    return best


def system_rates(P, alpha, beta):
    """Rates for stacked allocations ``P[..., L, 2]``."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float).copy()
    np.fill_diagonal(beta, 0.0)
    tot = P.sum(axis=-1)
    interf = np.einsum("lj,...j->...l", beta, tot)
    r1 = np.log2(1.0 + alpha[:, 0] * P[..., 0])
    r2 = np.log2(1.0 + P[..., 1] / (P[..., 0] + interf + 1.0 / alpha[:, 1]))
    return r1, r2


def _system_eval(P, alpha, beta, r_min, p_max, xi, p_c):
    r1, r2 = system_rates(P, alpha, beta)
    ee = (r1 + r2).sum(axis=-1) / (xi * P.sum(axis=(-1, -2)) + p_c)
    ok = np.all((r1 >= r_min) & (r2 >= r_min) & (P.sum(axis=-1) <= p_max), axis=-1)
    return np.where(ok, ee, -np.inf)


def _triangle(n, p_max):
    g = np.linspace(0.0, p_max, n + 1)
    a, b = np.meshgrid(g, g, indexing="ij")
    keep = a + b <= p_max * (1 + 1e-12)
    return np.column_stack([a[keep], b[keep]])


def _pattern_zoom(evaluate, best_p, best, step, p_max, refine_tol, max_levels):
    """Local lattice search around the incumbent.

    A 9-point-per-axis window of half-width two steps is re-gridded around
    the incumbent. The window follows the incumbent while it improves (so
    optima on a curved QoS boundary can be tracked) and halves its step
    otherwise, until the step falls below ``refine_tol * p_max``.
    """
    n_dim = best_p.size
    offsets = np.linspace(-2.0, 2.0, 9)
    mesh = np.array(list(itertools.product(offsets, repeat=n_dim)))
    for _ in range(max_levels):
        cand = np.clip(best_p.reshape(1, -1) + step * mesh, 0.0, p_max).reshape(-1, *best_p.shape)
        val = evaluate(cand)
        k = int(np.argmax(val))
        if val[k] > best:
            best_p, best = cand[k].copy(), float(val[k])
            continue
        step *= 0.5
        if step < refine_tol * p_max:
            break
    return best_p, best


def grid_search_system(alpha, beta, qos, xi, circuit_power, divisions=SYSTEM_COARSE_DIVISIONS,
                       refine_tol=1e-7, max_levels=2000):
    """Global EE optimum for ``L <= 2`` clusters by grid search plus zooming.

    A coarse grid with ``divisions`` steps per axis covers every cluster's
    power triangle; the incumbent is then refined by :func:`_pattern_zoom`.
    Returns ``(P, ee_ratio)`` with ``P`` of shape ``(L, 2)``.
    """
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    L = alpha.shape[0]
    if L > 2:
        raise ConfigError("grid_search_system supports at most two clusters")
    beta = np.zeros((L, L)) if beta is None else np.asarray(beta, dtype=float)
    p_max, r_min = qos.p_max, qos.r_min
    tri = _triangle(divisions, p_max)
    if L == 1:
        P = tri[:, None, :]
        ee = _system_eval(P, alpha, beta, r_min, p_max, xi, circuit_power)
    else:
        n = len(tri)
        ee = np.full(n * n, -np.inf)
        P = np.empty((n * n, 2, 2))
        P[:, 0, :] = np.repeat(tri, n, axis=0)
        P[:, 1, :] = np.tile(tri, (n, 1))
        for s in range(0, n * n, 200_000):
            ee[s:s + 200_000] = _system_eval(P[s:s + 200_000], alpha, beta, r_min, p_max,
                                             xi, circuit_power)
    k = int(np.argmax(ee))
    if not np.isfinite(ee[k]):
        raise InfeasibleError("no grid point meets the QoS and power constraints")
    best_p, best = P[k].copy(), float(ee[k])


    def evaluate(cand):
        return _system_eval(cand, alpha, beta, r_min, p_max, xi, circuit_power)

    return _pattern_zoom(evaluate, best_p, best, p_max / divisions, p_max, refine_tol, max_levels)


def grid_search_subtractive(alpha, beta, qos, lam_xi, divisions=SYSTEM_COARSE_DIVISIONS,
                            refine_tol=1e-7, max_levels=2000):
    """Same search as :func:`grid_search_system` but on ``sum(R) - lam_xi sum(P)``."""
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    L = alpha.shape[0]
    if L > 2:
        raise ConfigError("grid_search_subtractive supports at most two clusters")
    beta = np.zeros((L, L)) if beta is None else np.asarray(beta, dtype=float)
    p_max, r_min = qos.p_max, qos.r_min

    def evaluate(P):
        r1, r2 = system_rates(P, alpha, beta)
        val = (r1 + r2).sum(axis=-1) - lam_xi * P.sum(axis=(-1, -2))
        ok = np.all((r1 >= r_min) & (r2 >= r_min) & (P.sum(axis=-1) <= p_max), axis=-1)
        return np.where(ok, val, -np.inf)

    tri = _triangle(divisions, p_max)
    if L == 1:
        P = tri[:, None, :]
    else:
        n = len(tri)
        P = np.empty((n * n, 2, 2))
        P[:, 0, :] = np.repeat(tri, n, axis=0)
        P[:, 1, :] = np.tile(tri, (n, 1))
    val = evaluate(P)
    k = int(np.argmax(val))
    if not np.isfinite(val[k]):
        raise InfeasibleError("no grid point meets the QoS and power constraints")
    best_p, best = P[k].copy(), float(val[k])
    return _pattern_zoom(evaluate, best_p, best, p_max / divisions, p_max, refine_tol, max_levels)


def grid_search_oma_cluster(alpha, qos, xi, circuit_power, divisions=COARSE_DIVISIONS,
                            refine_levels=3):
    """EE of one TDMA cluster over the ``[0, p_max]^2`` slot-power square."""
    a1, a2 = float(alpha[0]), float(alpha[1])
    p_max, r_min = qos.p_max, qos.r_min

    def search(lo1, hi1, lo2, hi2, step):
        g1 = np.clip(np.arange(lo1, hi1 + 0.5 * step, step), 0, p_max)
        g2 = np.clip(np.arange(lo2, hi2 + 0.5 * step, step), 0, p_max)
        P1, P2 = np.meshgrid(g1, g2, indexing="ij")
        r1 = 0.5 * np.log2(1 + a1 * P1)
        r2 = 0.5 * np.log2(1 + a2 * P2)
        ee = (r1 + r2) / (0.5 * xi * (P1 + P2) + circuit_power)
        ee = np.where((r1 >= r_min) & (r2 >= r_min), ee, -np.inf)
        k = np.unravel_index(int(np.argmax(ee)), ee.shape)
        return float(P1[k]), float(P2[k]), float(ee[k])

    step = p_max / divisions
    best = search(0, p_max, 0, p_max, step)
    if not np.isfinite(best[2]):
        raise InfeasibleError("no grid point meets the QoS constraints")
    for _ in range(refine_levels):
        fine = step / REFINE_FACTOR
        cand = search(best[0] - step, best[0] + step, best[1] - step, best[1] + step, fine)
        if cand[2] >= best[2]:
            best = cand
        step = fine
    return best


def line_search_single_user(alpha, xi, circuit_power, p_lo, p_max):
    """Scalar EE optimum of ``log2(1 + alpha P) / (xi P + P_C)`` on ``[p_lo, p_max]``."""

    def neg(p):
        return -math.log2(1.0 + alpha * p) / (xi * p + circuit_power)

    res = minimize_scalar(neg, bounds=(p_lo, p_max), method="bounded",
                          options={"xatol": 1e-12 * p_max})
    cands = [(neg(p_lo), p_lo), (neg(p_max), p_max), (res.fun, res.x)]
    val, p = min(cands)
    return float(p), -float(val)
