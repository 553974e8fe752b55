"""Bound sweeps and Monte Carlo comparisons of the IV-SSF variants."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..bounds import SingularBoundError, crb_cor, crb_det, crb_iid, ivssf_asymptotic_cov
from ..ivssf import IvConfig, IvError, estimate
from ..sampler import GENERATOR_NAME, RngSpec, draw_correlated, draw_fir_stream
from ..scenario import build_scenario

log = logging.getLogger(__name__)

METHOD_VARIANT = {"ivssf-1": "one-sided", "ivssf-2": "two-sided"}
METHOD_SUFFIX = {"ivssf-1": "1s", "ivssf-2": "2s"}
# trial streams for axis index a use stream ids a * STREAM_STRIDE + trial
STREAM_STRIDE = 10**9
MAX_FAILURE_FRACTION = 0.01


class NumericalFailure(RuntimeError):
    pass


def scenario_at(spec, value):
    """Scenario config with the sweep axis set to ``value``."""
    cfg = spec.scenario
    if spec.axis == "n":
        return replace(cfg, n=int(value))
    if spec.axis == "snr_db":
        return replace(cfg, snr_db=float(value))
    return cfg


def m_at(spec, value):
    return int(value) if spec.axis == "M" else spec.M


def _to_electrical(bound, scn):
    """Convert a bound on theta into one on the electrical angle."""
    rate = scn.array.electrical_rate(scn.sources.angles)
    return bound * np.outer(rate, rate)


# ---------------------------------------------------------------------------
# bounds


@dataclass
class BoundsTable:
    axis: str
    columns: list
    rows: list = field(default_factory=list)


def run_bounds_sweep(spec):
    """CRB^det, CRB^iid and CRB^cor diagonals along the sweep axis.

    ``mode="ratio"`` adds ``det/iid`` and ``cor/iid`` columns.
    """
    m = len(spec.scenario.angles)
    src = [f"s{i + 1}" for i in range(m)]
    cols = [spec.axis]
    for model in ("det", "iid", "cor"):
        cols += [f"crb_{model}_{s}" for s in src]
    if spec.mode == "ratio":
        cols += [f"det_over_iid_{s}" for s in src] + [f"cor_over_iid_{s}" for s in src]
    table = BoundsTable(spec.axis, cols)
    for value in spec.values:
        scn = build_scenario(scenario_at(spec, value))
        det, iid, cor = crb_det(scn).diag, crb_iid(scn).diag, crb_cor(scn).diag
        row = [value, *det, *iid, *cor]
        if spec.mode == "ratio":
            row += list(det / iid) + list(cor / iid)
        table.rows.append(row)
    return table


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MethodStats:
    bias: np.ndarray
    std: np.ndarray
    se_std: np.ndarray
    trials: int
    failures: int
    sqrt_cov: np.ndarray  # large-sample IV-SSF prediction, nan if undefined


@dataclass
class MonteCarloRow:
    value: float
    methods: dict
    sqrt_crb_cor: np.ndarray


@dataclass
class MonteCarloReport:
    axis: str
    methods: list
    num_sources: int
    rows: list = field(default_factory=list)
    seed: int = 0
    generator: str = GENERATOR_NAME


def summarize(errors):
    """Bias, sample std (ddof=1) and normal-theory standard error of the std."""
    errors = np.asarray(errors, dtype=float)
    k = errors.shape[0]
    bias = errors.mean(axis=0)
    if k < 2:
        std = np.zeros(errors.shape[1:])
        return bias, std, np.zeros_like(std)
    std = errors.std(axis=0, ddof=1)
    return bias, std, std / np.sqrt(2 * (k - 1))


def _draw(scn, cfg, rng):
    if cfg.signal.kind == "fir":
        return draw_fir_stream(scn, cfg.signal.taps, rng).X
    return draw_correlated(scn, rng).X


def _run_trials(args):
    cfg, methods, M, steps, seed, axis_index, trials = args
    scn = build_scenario(cfg)
    ivs = {
        name: IvConfig(M=M, variant=METHOD_VARIANT[name], num_sources=scn.num_sources,
                       coarse_step=steps[0], fine_step=steps[1])
        for name in methods
    }
    out = {name: [] for name in methods}
    for t in trials:
        X = _draw(scn, cfg, RngSpec(seed, axis_index * STREAM_STRIDE + t))
        for name, iv in ivs.items():
            try:
                est = estimate(X, iv, scn.array.positions)
                out[name].append((t, np.sort(est.omega), est.criterion, np.sort(est.coarse)))
            except IvError as exc:
                log.debug("trial %d (%s) failed: %s", t, name, exc)
                out[name].append((t, None, None, None))
    return out


def _chunks(n, parts):
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_montecarlo(spec, diagnostics=None):
    """Bias and std of each IV-SSF variant along the sweep axis.

    Both methods see the same snapshot matrices. Trial ``t`` at axis index
    ``a`` draws from stream ``a * 1e9 + t`` of the configured seed, so results
    do not depend on ``workers``. Failed trials (singular sample statistics)
    are excluded and counted; more than 1% failures aborts the run.
    ``diagnostics``, if a list, receives per-trial records.
    """
    spec.validate()
    m = len(spec.scenario.angles)
    report = MonteCarloReport(spec.axis, list(spec.methods), m, seed=spec.seed)
    steps = (spec.coarse_step, spec.fine_step)
    for a, value in enumerate(spec.values):
        cfg = scenario_at(spec, value)
        M = m_at(spec, value)
        scn = build_scenario(cfg)
        truth = np.sort(scn.array.electrical(scn.sources.angles))
        parts = max(1, min(spec.workers, spec.trials))
        jobs = [(cfg, spec.methods, M, steps, spec.seed, a, list(ch)) for ch in _chunks(spec.trials, parts)]
        if parts > 1:
            with ProcessPoolExecutor(parts) as pool:
                results = list(pool.map(_run_trials, jobs))
        else:
            results = [_run_trials(j) for j in jobs]

        stats = {}
        for name in spec.methods:
            recs = sorted((r for res in results for r in res[name]), key=lambda r: r[0])
            good = [r for r in recs if r[1] is not None]
            failures = len(recs) - len(good)
            if failures > MAX_FAILURE_FRACTION * spec.trials:
                raise NumericalFailure(
                    f"{name} at {spec.axis}={value}: {failures}/{spec.trials} trials failed"
                )
            if not good:
                raise NumericalFailure(f"{name} at {spec.axis}={value}: no successful trials")
            errs = np.array([r[1] for r in good]) - truth
            bias, std, se = summarize(errs)
            try:
                cov = ivssf_asymptotic_cov(scn, M=M, variant=METHOD_VARIANT[name])
                sqrt_cov = np.sqrt(np.diag(_to_electrical(cov.matrix, scn)))
            except (SingularBoundError, ValueError):
                sqrt_cov = np.full(m, np.nan)
            stats[name] = MethodStats(bias, std, se, len(good), failures, sqrt_cov)
            if diagnostics is not None:
                for t, est, crit, coarse in recs:
                    diagnostics.append({
                        "axis_value": value, "method": name, "trial": t,
                        "estimate": None if est is None else est.tolist(),
                        "criterion": crit,
                        "coarse": None if coarse is None else coarse.tolist(),
                    })
        crb = crb_cor(scn)
        sqrt_crb = np.sqrt(np.diag(_to_electrical(crb.matrix, scn)))
        report.rows.append(MonteCarloRow(value, stats, sqrt_crb))
        log.info("%s=%s done", spec.axis, value)
    return report
