"""Instrumental-variable signal subspace fitting (IV-SSF) direction estimator.

The instrument vector stacks snapshots away from the current time:

* one-sided: ``phi(t) = [x(t-1); ...; x(t-M)]``
* two-sided: ``phi(t) = [x(t+M/2); ...; x(t+1); x(t-1); ...; x(t-M/2)]``

Both variants average exactly ``n - M`` outer products. Because the noise is
temporally white, ``E[phi(t) x(t)^H]`` contains no noise term.

Estimation runs over electrical angles ``omega`` (see
:mod:`tcdoa.scenario`); time indices are zero-based columns of ``X``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .bounds import instrument_offsets
from .matstack import NotPositiveDefiniteError, dominant_svd, herm_sqrt_inv
from .scenario import steering_from_omega

log = logging.getLogger(__name__)

VARIANTS = ("one-sided", "two-sided")


class IvError(np.linalg.LinAlgError):
    """Sample statistics are unusable (for instance a singular instrument covariance)."""


@dataclass(frozen=True)
class IvConfig:
    M: int = 2
    variant: str = "one-sided"
    num_sources: int = 1
    coarse_step: float = 0.01
    fine_step: float = 0.001
    interval: tuple = (-np.pi, np.pi)
    block_index: int = 0
    max_sweeps: int = 20

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.M < 1 or (self.variant == "one-sided" and self.M < 2):
            raise ValueError("one-sided IV-SSF needs M >= 2")
        if self.variant == "two-sided" and self.M % 2:
            raise ValueError("two-sided IV-SSF needs an even M")
        if not 0 < self.fine_step < self.coarse_step:
            raise ValueError("grid steps must satisfy 0 < fine_step < coarse_step")
        if not self.interval[0] < self.interval[1]:
            raise ValueError("search interval is empty")
        if not 0 <= self.block_index < self.M:
            raise ValueError("block_index must address one of the M instrument blocks")

    @property
    def offsets(self):
        return instrument_offsets(self.M, self.variant)

    def valid_times(self, n):
        """Zero-based times t at which phi(t) is defined."""
        if self.variant == "one-sided":
            return np.arange(self.M, n)
        h = self.M // 2
        return np.arange(h, n - h)

    def check_length(self, n):
        if not self.M < n / 2:
            raise ValueError(f"need M < n/2 (M={self.M}, n={n})")


@dataclass(frozen=True, eq=False)
class IvStatistics:
    sigma: np.ndarray  # ML x L, sample E[phi x^H]
    phi: np.ndarray  # ML x ML, sample E[phi phi^H]
    r0: np.ndarray  # L x L diagonal block of phi
    vs: np.ndarray  # L x m dominant right singular vectors of Phi^-1/2 Sigma
    singular_values: np.ndarray  # length m, nonincreasing
    num_terms: int

    @property
    def weight(self):
        """``R0^-1/2 Vs diag(s^2) Vs^H R0^-1/2``, the matrix the criterion projects."""
        w = herm_sqrt_inv(self.r0)
        v = w @ self.vs
        return (v * self.singular_values**2) @ v.conj().T


def build_instrument(X, t, config):
    """Stacked instrument vector phi(t) for zero-based time ``t``."""
    X = np.asarray(X)
    n = X.shape[1]
    valid = config.valid_times(n)
    if valid.size == 0 or not valid[0] <= t <= valid[-1]:
        raise IndexError(f"t={t} outside the valid range for the {config.variant} instrument")
    return np.concatenate([X[:, t + o] for o in config.offsets])


def instrument_matrix(X, config):
    """Columns phi(t) over all valid t, and the matching x(t) columns."""
    X = np.asarray(X)
    ts = config.valid_times(X.shape[1])
    if ts.size < 1:
        raise IvError("no valid time index for the instrument vector; increase n")
    return np.vstack([X[:, ts + o] for o in config.offsets]), X[:, ts]


def statistics_from_moments(sigma, phi, config, num_terms=0):
    """Derived quantities (R0, Vs, singular values) from given ``Sigma`` and ``Phi``.

    Also used to inject exact moments, bypassing sampling.
    """
    sigma = np.asarray(sigma)
    phi = np.asarray(phi)
    L = sigma.shape[1]
    b = config.block_index
    r0 = phi[b * L:(b + 1) * L, b * L:(b + 1) * L].copy()
    try:
        g = herm_sqrt_inv(phi) @ sigma
        herm_sqrt_inv(r0)
    except NotPositiveDefiniteError as exc:
        raise IvError(
            f"sample instrument covariance is numerically singular ({exc}); use a larger n or smaller M"
        ) from None
    _, s, v = dominant_svd(g, config.num_sources)
    return IvStatistics(sigma, phi, r0, v, s, num_terms)


def sample_statistics(X, config):
    """Sample ``Sigma``, ``Phi`` averaged over the ``n - M`` valid times, plus derived terms."""
    phi_cols, x_cols = instrument_matrix(np.asarray(X), config)
    k = x_cols.shape[1]
    sigma = phi_cols @ x_cols.conj().T / k
    phi = phi_cols @ phi_cols.conj().T / k
    return statistics_from_moments(sigma, phi, config, k)


def _criterion_values(weight, w, steering):
    """Criterion for a batch of candidate steering matrices of shape (K, L, m)."""
    b = np.einsum("ij,kjm->kim", w, steering)
    gram = np.einsum("kim,kin->kmn", b.conj(), b)
    bw = np.einsum("kim,ij->kmj", b.conj(), weight)  # B^H G
    tr = np.trace(weight).real
    out = np.full(steering.shape[0], np.inf)
    # rank check on each candidate
    sv = np.linalg.svd(b, compute_uv=False)
    ok = sv[:, -1] > 1e-8 * sv[:, 0]
    if not np.all(ok):
        log.debug("rejected %d rank-deficient candidates", int((~ok).sum()))
    if np.any(ok):
        sol = np.linalg.solve(gram[ok], bw[ok])  # (B^H B)^-1 B^H G
        proj_tr = np.einsum("kim,kmi->k", b[ok], sol).real
        out[ok] = np.maximum(tr - proj_tr, 0.0)
    return out


def criterion(omega, stats, positions):
    """``Tr(Pi^perp R0^-1/2 Vs S^2 Vs^H R0^-1/2)`` at electrical angles ``omega``.

    ``Pi^perp`` projects onto the orthogonal complement of ``R0^-1/2 A(omega)``.
    Candidates with rank-deficient ``A`` return ``inf``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    a = steering_from_omega(positions, omega)[None]
    w = herm_sqrt_inv(stats.r0)
    return float(_criterion_values(stats.weight, w, a)[0])


def criterion_grid(grid, stats, positions, fixed=(), slot=None):
    """Criterion over a 1-D grid for one coordinate, the others held at ``fixed``."""
    grid = np.asarray(grid, dtype=float)
    fixed = np.asarray(fixed, dtype=float)
    slot = fixed.size if slot is None else slot
    cols = np.insert(np.broadcast_to(fixed, (grid.size, fixed.size)), slot, grid, axis=1)
    a = np.exp(1j * np.asarray(positions, float)[None, :, None] * cols[:, None, :])
    w = herm_sqrt_inv(stats.r0)
    return _criterion_values(stats.weight, w, a)


def coarse_grid(config):
    lo, hi = config.interval
    return lo + config.coarse_step * np.arange(int(np.ceil((hi - lo) / config.coarse_step - 1e-9)))


def fine_grid(center, config):
    c, f = config.coarse_step, config.fine_step
    k = int(round(c / f))
    return center + f * np.arange(-k, k + 1)


@dataclass
class Estimate:
    omega: np.ndarray
    criterion: float
    coarse: np.ndarray
    sweeps: int = 0
    trace: list = field(default_factory=list)


def _argmin(values, grid):
    # first index wins, so ties go to the smallest omega
    i = int(np.argmin(values))
    return grid[i], values[i]


def _coordinate_search(stats, positions, grid_fn, start, max_sweeps, trace):
    est = np.array(start, dtype=float)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for j in range(est.size):
            others = np.delete(est, j)
            grid = grid_fn(est[j])
            vals = criterion_grid(grid, stats, positions, others, slot=j)
            best, val = _argmin(vals, grid)
            trace.append(float(val))
            if best != est[j]:
                est[j] = best
                changed = True
        if not changed:
            break
    return est, sweeps


def estimate_from_statistics(stats, config, positions):
    m = config.num_sources
    coarse = coarse_grid(config)
    trace = []
    # greedy start: add sources one at a time on the coarse grid
    est = np.empty(0)
    for _ in range(m):
        vals = criterion_grid(coarse, stats, positions, est)
        best, val = _argmin(vals, coarse)
        trace.append(float(val))
        est = np.append(est, best)
    sweeps = 0
    if m > 1:
        est, sweeps = _coordinate_search(
            stats, positions, lambda _c: coarse, est, config.max_sweeps, trace
        )
    coarse_est = est.copy()
    est, s2 = _coordinate_search(
        stats, positions, lambda c: fine_grid(c, config), est,
        config.max_sweeps if m > 1 else 1, trace,
    )
    value = criterion(est, stats, positions)
    return Estimate(est, value, coarse_est, sweeps + s2, trace)


def estimate(X, config, positions):
    """Two-stage grid estimate of the electrical angles from snapshots ``X`` (L x n).

    A coarse pass over ``config.interval`` is followed by a fine pass over
    ``+/- coarse_step`` around the coarse minimizer. With several sources the
    passes alternate over coordinates until no coordinate moves.
    """
    X = np.asarray(X)
    config.check_length(X.shape[1])
    stats = sample_statistics(X, config)
    return estimate_from_statistics(stats, config, positions)


def grid_search_2d(stats, positions, grid):
    """Exhaustive search over pairs of electrical angles (two-source oracle)."""
    grid = np.asarray(grid, float)
    best = (np.inf, None)
    for i, w1 in enumerate(grid):
        vals = criterion_grid(grid[i + 1:], stats, positions, [w1])
        if vals.size and vals.min() < best[0]:
            j = int(np.argmin(vals))
            best = (vals[j], np.array([w1, grid[i + 1 + j]]))
    return best[1], best[0]
