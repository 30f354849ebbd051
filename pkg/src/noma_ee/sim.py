"""Monte Carlo harness: drop users, pair, precode, solve, average.

Every trial is a pure function of ``(config.seed, trial_index)``. All three
schemes (NOMA-EE, NOMA-MaxSE, OMA) and every sweep point of a trial reuse
the same channel realization.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import generate_channel
from .clustering import pair_users
from .config import ScenarioConfig
from .exceptions import (
    ConfigError,
    ConvergenceError,
    InfeasibleError,
    OrderingError,
    PairingInfeasibleError,
    PrecoderSingularError,
)
from .oma import oma_gains, oma_solve
from .precoding import HybridBeamformer
from .solver import QoSConstraints, dinkelbach, max_se, sic_margin

logger = logging.getLogger(__name__)

STATUSES = ("ok", "pairing-infeasible", "qos-infeasible", "ordering-failed",
            "precoder-singular", "solver-failed")

CSV_COLUMNS = ("sweep_value", "ee_noma_mean", "ee_noma_ci95", "ee_oma_mean", "ee_oma_ci95",
               "ee_maxse_mean", "se_noma_mean", "se_oma_mean", "ok_fraction", "trials")

MBIT = 1e6

SCHEMES = ("noma", "oma", "maxse")


@dataclass
class TrialResult:
    """Metrics of one trial at one sweep point.

    EE values are in Mbit/J. ``se_noma`` / ``se_oma`` are the sum rates
    (bit/s/Hz) of the max-SE allocations; ``se_noma_ee`` is the sum rate at
    the EE optimum. Metrics are NaN unless ``status == "ok"``.
    """

    trial: int
    sweep_value: float
    status: str = "ok"
    ee_noma: float = math.nan
    ee_oma: float = math.nan
    ee_maxse: float = math.nan
    se_noma: float = math.nan
    se_oma: float = math.nan
    se_noma_ee: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class Realization:
    """One trial's user drop after pairing."""

    trial: int
    pairs: list
    attempts: int
    status: str = "ok"


def drop_users(config: ScenarioConfig, rng) -> list:
    """Users uniform in the annulus ``[min_distance_m, cell_radius_m]``.

    Each user's paths leave the array around its own azimuth with
    ``angular_spread_deg`` standard deviation.
    """
    u = rng.uniform(size=config.users_dropped)
    r0, r1 = config.min_distance_m, config.cell_radius_m
    radius = np.sqrt(r0 * r0 + u * (r1 * r1 - r0 * r0))
    azimuth = rng.uniform(0.0, 2.0 * math.pi, config.users_dropped)
    spread = config.angular_spread_rad if config.angular_spread_deg > 0 else None
    return [
        generate_channel(rng, config.array, config.paths_per_user, float(d), config.sigma_f,
                         config.pathloss_exponent, intercept_db=config.pathloss_intercept_db,
                         aod_center=float(phi) if spread is not None else None,
                         angular_spread=spread)
        for d, phi in zip(radius, azimuth)
    ]


def draw_realization(config: ScenarioConfig, trial_index: int) -> Realization:
    """Drop and pair users, re-drawing on pairing or ZF failure.

    The ZF check uses the base ``n_rf`` hybrid precoder; up to
    ``max_redraws`` extra drops are attempted.
    """
    rng = np.random.default_rng([config.seed, trial_index])
    status = "pairing-infeasible"
    for attempt in range(config.max_redraws + 1):
        users = drop_users(config, rng)
        try:
            clusters = pair_users(users, config.n_clusters, config.epsilon_corr)
        except PairingInfeasibleError:
            status = "pairing-infeasible"
            continue
        pairs = [(users[c.strong], users[c.weak]) for c in clusters]
        try:
            HybridBeamformer(config.noise_power_w, n_rf=config.n_rf).fit(pairs)
        except PrecoderSingularError:
            status = "precoder-singular"
            continue
        except OrderingError:
            pass  # recorded per sweep point, not a reason to re-draw
        return Realization(trial_index, pairs, attempt + 1)
    return Realization(trial_index, [], config.max_redraws + 1, status)


@dataclass
class _Stage:
    gains: object
    oma: object
    n_rf: int
    error: str | None = None
    swapped: int = 0


def _precode(config: ScenarioConfig, pairs, n_rf: int) -> _Stage:
    digital = n_rf == config.n_tx
    bf = HybridBeamformer(config.noise_power_w, n_rf=n_rf, digital=digital)
    try:
        bf.fit(pairs)
        og = oma_gains(bf.channels_, bf.precoder_.analog, config.noise_power_w,
                       config.oma_precoding)
    except OrderingError:
        return _Stage(None, None, n_rf, "ordering-failed")
    except PrecoderSingularError:
        return _Stage(None, None, n_rf, "precoder-singular")
    return _Stage(bf.gains_, og, n_rf, swapped=int(len(bf.swapped_)))


def check_schemes(schemes) -> tuple:
    """Normalise a scheme selection; ``"all"`` or ``None`` means every scheme."""
    if schemes is None or schemes == "all":
        return SCHEMES
    if isinstance(schemes, str):
        schemes = (schemes,)
    bad = [x for x in schemes if x not in SCHEMES]
    if bad or not schemes:
        raise ConfigError(f"unknown scheme(s) {bad}; choose from {SCHEMES} or 'all'")
    return tuple(x for x in SCHEMES if x in schemes)


def _solve_point(config: ScenarioConfig, stage: _Stage, trial: int, sweep_value: float,
                 total_dbm: float, trace: bool = False, schemes=SCHEMES) -> TrialResult:
    """Solve the selected schemes; metrics of skipped schemes stay NaN.

    ``maxse`` fills ``ee_maxse`` and ``se_noma``; ``oma`` fills ``ee_oma`` and
    ``se_oma`` (EE-optimal and max-SE TDMA); ``noma`` fills ``ee_noma``.
    """
    res = TrialResult(trial=trial, sweep_value=float(sweep_value))
    if stage.error is not None:
        res.status = stage.error
        return res
    qos = QoSConstraints(config.r_min_bps_hz, config.per_cluster_power_w(total_dbm))
    model = config.power_model
    kw = dict(n_rf=stage.n_rf, n_tx=config.n_tx, bandwidth=config.bandwidth_hz)
    ee = se = None
    try:
        if "noma" in schemes:
            ee = dinkelbach(stage.gains, qos, model, inner_solver=config.inner_solver, **kw)
        if "maxse" in schemes:
            se = max_se(stage.gains, qos, model, inner_solver=config.inner_solver, **kw)
        if "oma" in schemes:
            oma_ee = oma_solve(stage.oma, qos, model, **kw)
            oma_se = oma_solve(stage.oma, qos, model, lam=0.0, **kw)
    except InfeasibleError:
        res.status = "qos-infeasible"
        return res
    except ConvergenceError as err:
        logger.warning("trial %d at %s: %s", trial, sweep_value, err)
        res.status = "solver-failed"
        return res
    if se is not None:
        res.ee_maxse = se.ee / MBIT
        res.se_noma = se.se
    if "oma" in schemes:
        res.ee_oma = oma_ee.ee / MBIT
        res.se_oma = oma_se.se
    res.diagnostics = {"p_max_w": qos.p_max, "swapped_clusters": stage.swapped}
    if ee is not None:
        res.ee_noma = ee.ee / MBIT
        res.se_noma_ee = ee.se
        res.diagnostics.update({
            "min_rate": float(ee.rates.min()),
            "max_cluster_power_w": float(ee.p.sum(axis=1).max()),
            "min_sic_margin": float(sic_margin(ee.p, stage.gains).min()),
            "lambda_star": ee.lambda_star,
            "eps_star": ee.diagnostics.eps_trace[-1],
        })
        if trace:
            res.diagnostics["solver"] = ee.diagnostics.to_dict()
    return res


def run_trial(config: ScenarioConfig, trial_index: int, total_power_dbm: float | None = None,
              n_rf: int | None = None, trace: bool = False, schemes=None) -> TrialResult:
    """Solve all schemes on trial ``trial_index`` at one operating point.

    Defaults: the first entry of ``config.total_power_dbm`` and ``config.n_rf``.
    """
    dbm = config.total_power_dbm[0] if total_power_dbm is None else float(total_power_dbm)
    n_rf = config.n_rf if n_rf is None else int(n_rf)
    real = draw_realization(config, trial_index)
    if real.status != "ok":
        return TrialResult(trial=trial_index, sweep_value=dbm, status=real.status)
    stage = _precode(config, real.pairs, n_rf)
    return _solve_point(config, stage, trial_index, dbm, dbm, trace, check_schemes(schemes))


def _power_trial(config, trial_index, dbm_list, trace=False, schemes=SCHEMES):
    real = draw_realization(config, trial_index)
    if real.status != "ok":
        return [TrialResult(trial_index, float(d), real.status) for d in dbm_list]
    stage = _precode(config, real.pairs, config.n_rf)
    return [_solve_point(config, stage, trial_index, d, d, trace, schemes) for d in dbm_list]


def _rf_trial(config, trial_index, rf_list, dbm, trace=False, schemes=SCHEMES):
    real = draw_realization(config, trial_index)
    if real.status != "ok":
        return [TrialResult(trial_index, float(n), real.status) for n in rf_list]
    return [_solve_point(config, _precode(config, real.pairs, int(n)), trial_index, n, dbm, trace,
                         schemes)
            for n in rf_list]


def _run_trials(fn, config, args, n_jobs):
    indices = range(config.trials)
    if n_jobs == 1:
        return [fn(config, i, *args) for i in indices]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(config, i, *args) for i in indices)


def summarize(results_by_point, sweep_values) -> list[dict]:
    """Average per-trial results into one table row per sweep point."""
    rows = []
    for value, results in zip(sweep_values, results_by_point):
        ok = [r for r in results if r.ok]
        n = len(ok)
        row = {"sweep_value": float(value), "trials": len(results),
               "ok_fraction": n / len(results) if results else 0.0}
        for key in ("ee_noma", "ee_oma", "ee_maxse", "se_noma", "se_oma"):
            vals = np.array([getattr(r, key) for r in ok], dtype=float)
            row[f"{key}_mean"] = float(vals.mean()) if n else math.nan
            if key in ("ee_noma", "ee_oma"):
                row[f"{key}_ci95"] = float(1.96 * vals.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        rows.append({c: row[c] for c in CSV_COLUMNS})
        if n == 0:
            logger.warning("sweep point %s: no feasible trial", value)
    return rows


def sweep_total_power(config: ScenarioConfig, dbm_list=None, n_jobs: int = 1,
                      return_trials: bool = False, trace: bool = False, schemes=None):
    """EE/SE versus total BS power, averaged over ``config.trials`` trials.

    Returns the summary rows, plus per-point lists of TrialResult when
    ``return_trials``.
    """
    dbm_list = list(config.total_power_dbm if dbm_list is None else dbm_list)
    args = (dbm_list, trace, check_schemes(schemes))
    per_trial = _run_trials(_power_trial, config, args, n_jobs)
    by_point = [[t[k] for t in per_trial] for k in range(len(dbm_list))]
    rows = summarize(by_point, dbm_list)
    return (rows, by_point) if return_trials else rows


def sweep_rf_chains(config: ScenarioConfig, n_rf_list=None, total_power_dbm=None,
                    n_jobs: int = 1, return_trials: bool = False, trace: bool = False,
                    schemes=None):
    """EE/SE versus RF-chain count at a fixed total power.

    ``n_rf == n_tx`` selects fully digital precoding (identity analog stage).
    Chains beyond the cluster count carry each cluster's next-best beams.
    """
    n_rf_list = [int(n) for n in (config.rf_chains if n_rf_list is None else n_rf_list)]
    for n in n_rf_list:
        if n < config.n_clusters or n > config.n_tx:
            raise ConfigError(f"n_rf={n} outside [{config.n_clusters}, {config.n_tx}]")
    dbm = config.rf_sweep_power_dbm if total_power_dbm is None else float(total_power_dbm)
    args = (n_rf_list, dbm, trace, check_schemes(schemes))
    per_trial = _run_trials(_rf_trial, config, args, n_jobs)
    by_point = [[t[k] for t in per_trial] for k in range(len(n_rf_list))]
    rows = summarize(by_point, n_rf_list)
    return (rows, by_point) if return_trials else rows


def write_csv(rows, path, sweep_name: str = "sweep_value", comments=()) -> None:
    """Write summary rows to ``path`` (a file name or an open text stream).

    Floats are written with ``repr`` so that :func:`read_csv` round-trips
    them exactly.
    """
    if hasattr(path, "write"):
        _write_rows(rows, path, sweep_name, comments)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(rows, fh, sweep_name, comments)


def _write_rows(rows, fh, sweep_name, comments):
    fh.write(f"# sweep_value: {sweep_name}\n")
    fh.write("# EE columns in Mbit/J (bandwidth x sum rate / consumed power); "
             "SE columns in bit/s/Hz at the max-SE allocation\n")
    fh.write("# ci95: half-width of the normal 95% confidence interval over ok trials\n")
    for line in comments:
        fh.write(f"# {line}\n")
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(row[k])) if k != "trials" else int(row[k])
                         for k in CSV_COLUMNS})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        rows.append({k: (int(v) if k == "trials" else float(v)) for k, v in rec.items()})
    return rows
