"""Synthetic snapshot generation for the three signal models.

All randomness is circular complex Gaussian: a standard draw is
``(g1 + 1j*g2) / sqrt(2)`` with independent real normals, so
``E[z z^H] = 1`` and ``E[z z^T] = 0``. Streams come from numpy's ``PCG64``
bit generator seeded through ``SeedSequence(seed, spawn_key=(stream,))``.

Snapshot matrices are ``L x n`` with column ``t`` holding ``x(t)``; batched
draws have shape ``(trials, L, n)``.
"""

from dataclasses import dataclass

import numpy as np

from .matstack import chol_factor, kron
from .scenario import fir_autocorrelation

GENERATOR_NAME = "PCG64"


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    return RngSpec(int(rng)).generator()


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    X: np.ndarray
    seed: int | None = None
    stream: int | None = None
    scenario_hash: str = ""
    generator: str = GENERATOR_NAME

    @property
    def shape(self):
        return self.X.shape


def circular_normal(rng, shape):
    """iid standard circular complex normals."""
    g = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2)


def _wrap(X, rng, scn):
    seed = rng.seed if isinstance(rng, RngSpec) else None
    stream = rng.stream if isinstance(rng, RngSpec) else None
    return SnapshotMatrix(X, seed, stream, scn.fingerprint())


def _batch_shape(trials, *shape):
    return shape if trials is None else (trials,) + shape


def draw_correlated(scn, rng, space_time=None, trials=None):
    """Draw ``vec(X) ~ CN(0, RR)`` with ``RR = AA PP AA^H + I_n (x) C``.

    ``vec`` stacks the columns x(1), ..., x(n). The covariance is factored as
    ``RR = F F^H`` (Cholesky) and applied to standard circular normals.
    """
    gen = as_generator(rng)
    pp = scn.signal.space_time if space_time is None else np.asarray(space_time)
    L = scn.num_sensors
    n = pp.shape[0] // scn.num_sources
    aa = kron(np.eye(n), scn.A)
    rr = aa @ pp @ aa.conj().T + kron(np.eye(n), scn.C)
    f = chol_factor(rr)
    z = circular_normal(gen, _batch_shape(trials, n * L))
    v = z @ f.T  # rows are f @ z
    # column-major vec -> (L, n)
    X = v.reshape(_batch_shape(trials, n, L)).swapaxes(-1, -2)
    return _wrap(np.ascontiguousarray(X), rng, scn)


def fir_source_stream(rng, taps, n, spatial_cov, trials=None):
    """Sources ``s(t) = sum_i f_i e(t-i)`` with unit-energy taps ``f``.

    The innovations ``e`` are iid ``CN(0, spatial_cov)``; the first
    ``len(taps) - 1`` outputs are discarded so every returned sample is in
    steady state. Shape ``(m, n)`` or ``(trials, m, n)``.
    """
    f = np.asarray(taps, dtype=float).ravel()
    f = f / np.linalg.norm(f)
    ps = np.atleast_2d(np.asarray(spatial_cov, dtype=complex))
    m = ps.shape[0]
    k = f.size
    g = chol_factor(ps)
    e = circular_normal(rng, _batch_shape(trials, m, n + k - 1))
    e = np.einsum("ij,...jt->...it", g, e)
    s = np.zeros(_batch_shape(trials, m, n), dtype=complex)
    for i in range(k):
        # s[t] = sum_i f_i e[t + k - 1 - i]
        s += f[i] * e[..., k - 1 - i:k - 1 - i + n]
    return s


def _noise(rng, C, n, trials):
    g = chol_factor(C)
    return np.einsum("ij,...jt->...it", g, circular_normal(rng, _batch_shape(trials, C.shape[0], n)))


def draw_fir_stream(scn, taps, rng, n=None, trials=None, spatial_cov=None):
    """``X = A S + V`` with FIR-filtered sources and spatially colored white noise.

    ``spatial_cov`` (the zero-lag source covariance) defaults to the
    scenario's ``P_0``.
    """
    gen = as_generator(rng)
    n = scn.n if n is None else n
    ps = scn.signal.zero_lag if spatial_cov is None else spatial_cov
    s = fir_source_stream(gen, taps, n, ps, trials)
    X = np.einsum("lm,...mt->...lt", scn.A, s) + _noise(gen, scn.C, n, trials)
    return _wrap(X, rng, scn)


def draw_deterministic(scn, S, rng, trials=None):
    """``X = A S + V`` for a fixed source matrix ``S`` (m x n); only the noise is random."""
    gen = as_generator(rng)
    S = np.asarray(S, dtype=complex)
    X = scn.A @ S + _noise(gen, scn.C, S.shape[1], trials)
    return _wrap(X, rng, scn)


def fir_lag_covariances(scn, taps, max_lag, spatial_cov=None):
    """Theoretical ``E[x(t-k) x(t)^H]`` for k = 0..max_lag under the FIR model."""
    ps = scn.signal.zero_lag if spatial_cov is None else spatial_cov
    r = fir_autocorrelation(taps, max_lag)
    aps = scn.A @ ps @ scn.A.conj().T
    return [r[k] * aps + (scn.C if k == 0 else 0) for k in range(max_lag + 1)]
