"""Array geometry, steering model and signal/noise covariance construction.

Angles are mapped to an electrical angle ``omega`` (phase advance per
half-wavelength of aperture) by the array's convention:

* ``"cosine"``: ``omega = pi * cos(theta)`` (theta measured from the array axis)
* ``"sine"``: ``omega = pi * sin(theta)`` (theta measured from broadside)
* ``"electrical"``: ``omega = theta``

Sensor positions are given in half-wavelength units, so element ``k`` of the
steering vector is ``exp(1j * omega * p_k)``.

Lag convention: ``P_k = E[s(t-k) s(t)^H]`` and ``P_{-k} = P_k^H``. The
space-time covariance of ``[s(t_1); ...; s(t_n)]`` then has block ``(i, j)``
equal to ``P_{j-i}``. For stacked samples ``s(t + tau_i)`` block ``(i, j)`` is
``P_{tau_j - tau_i}`` and the cross-covariance with ``s(t)`` is ``P_{-tau_i}``.
"""

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .matstack import MatrixError, hermitize, kron, psd_check

CONVENTIONS = ("cosine", "sine", "electrical")


class ScenarioError(ValueError):
    """Invalid scenario description."""


# ---------------------------------------------------------------------------
# array model


@dataclass(frozen=True, eq=False)
class ArrayModel:
    positions: np.ndarray
    convention: str = "cosine"

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        if pos.size < 2:
            raise ScenarioError("an array needs at least two sensors")
        if np.any(np.diff(pos) <= 0):
            raise ScenarioError("sensor positions must be strictly increasing")
        if self.convention not in CONVENTIONS:
            raise ScenarioError(f"unknown angle convention {self.convention!r}; use one of {CONVENTIONS}")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def ula(cls, num_sensors, spacing=1.0, convention="cosine"):
        """Uniform linear array; ``spacing`` in half wavelengths."""
        return cls(np.arange(num_sensors) * float(spacing), convention)

    @property
    def num_sensors(self):
        return self.positions.size

    def electrical(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.convention == "cosine":
            return np.pi * np.cos(theta)
        if self.convention == "sine":
            return np.pi * np.sin(theta)
        return theta.copy()

    def electrical_rate(self, theta):
        """d omega / d theta."""
        theta = np.asarray(theta, dtype=float)
        if self.convention == "cosine":
            return -np.pi * np.sin(theta)
        if self.convention == "sine":
            return np.pi * np.cos(theta)
        return np.ones_like(theta)


def steering_from_omega(positions, omega):
    """Steering vectors for electrical angles; shape (L,) or (L, len(omega))."""
    return np.exp(1j * np.multiply.outer(np.asarray(positions, dtype=float), omega))


def steering_vector(array, theta):
    return steering_from_omega(array.positions, array.electrical(theta))


def steering_derivative(array, theta):
    """Derivative of the steering vector with respect to ``theta``."""
    a = steering_vector(array, theta)
    rate = array.electrical_rate(theta)
    return 1j * np.multiply.outer(array.positions, rate) * a


# ---------------------------------------------------------------------------
# sources


@dataclass(frozen=True, eq=False)
class SourceSet:
    angles: np.ndarray

    def __post_init__(self):
        ang = np.atleast_1d(np.asarray(self.angles, dtype=float))
        if ang.ndim != 1 or ang.size < 1:
            raise ScenarioError("need at least one source angle")
        if np.unique(ang).size != ang.size:
            raise ScenarioError("source angles must be distinct")
        object.__setattr__(self, "angles", ang)

    @property
    def num_sources(self):
        return self.angles.size

    def electrical_angles(self, array):
        return array.electrical(self.angles)


def _check_geometry(array, sources):
    if sources.num_sources >= array.num_sensors:
        raise ScenarioError(
            f"need fewer sources than sensors (m={sources.num_sources}, L={array.num_sensors})"
        )


def build_A(array, sources, rank_tol=1e-10):
    """Steering matrix (L x m); raises if its columns are linearly dependent."""
    _check_geometry(array, sources)
    a = steering_vector(array, sources.angles)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= rank_tol * s[0]:
        raise ScenarioError(
            f"steering matrix is rank deficient (singular values {s}); sources are not resolvable"
        )
    return a


def build_D(array, sources):
    _check_geometry(array, sources)
    return steering_derivative(array, sources.angles)


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Spatial noise covariance ``C`` (already scaled by ``noise_power``)."""

    spatial_cov: np.ndarray
    noise_power: float

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ScenarioError("noise power must be positive")

    @property
    def num_sensors(self):
        return self.spatial_cov.shape[0]

    def space_time(self, n):
        """Space-time noise covariance ``I_n (x) C``."""
        return kron(np.eye(n), self.spatial_cov)

    def scaled(self, noise_power):
        c = self.spatial_cov * (noise_power / self.noise_power)
        return NoiseModel(c, float(noise_power))


def build_noise_cov(num_sensors, noise_power, decay=1.0):
    """``C_ij = sigma^2 exp(-decay |i - j|)`` over sensor indices."""
    idx = np.arange(num_sensors, dtype=float)
    c = noise_power * np.exp(-decay * np.abs(np.subtract.outer(idx, idx)))
    return NoiseModel(c.astype(complex), float(noise_power))


# ---------------------------------------------------------------------------
# signal covariance


def _exp_decay_matrix(size, rate):
    lag = np.abs(np.subtract.outer(np.arange(size), np.arange(size)))
    if np.isinf(rate):
        return (lag == 0).astype(float)
    return np.exp(-rate * lag)


def _toeplitz_from_lags(lags, n):
    m = lags.shape[1]
    # ext[k + n - 1] = P_k for k in -(n-1)..(n-1)
    neg = lags[1:n][::-1].conj().transpose(0, 2, 1)
    ext = np.concatenate([neg, lags[:n]])
    k = np.subtract.outer(np.arange(n), np.arange(n)).T + (n - 1)  # k[i, j] = j - i + n - 1
    return ext[k].transpose(0, 2, 1, 3).reshape(n * m, n * m)


@dataclass(frozen=True, eq=False)
class SignalCovariance:
    """Signal second-order statistics over ``n`` snapshots.

    ``lags[k]`` holds ``P_k`` for ``k = 0..len(lags)-1`` (stationary case).
    Non-stationary covariances carry ``lags=None`` and only ``space_time``.
    """

    space_time: np.ndarray
    num_sources: int
    lags: np.ndarray | None = None

    @classmethod
    def from_lags(cls, lags, n):
        lags = np.asarray(lags, dtype=complex)
        if lags.ndim != 3 or lags.shape[1] != lags.shape[2]:
            raise ScenarioError("lags must have shape (K, m, m)")
        if n < 1:
            raise ScenarioError("n must be positive")
        m = lags.shape[1]
        full = np.zeros((max(n, lags.shape[0]), m, m), dtype=complex)
        full[: lags.shape[0]] = lags
        full[0] = hermitize(full[0])
        return cls(_toeplitz_from_lags(full, n), m, full)

    @classmethod
    def from_space_time(cls, space_time, num_sources):
        p = hermitize(np.asarray(space_time, dtype=complex))
        if p.shape[0] % num_sources:
            raise ScenarioError("space-time matrix size is not a multiple of the source count")
        return cls(p, num_sources, None)

    @property
    def n(self):
        return self.space_time.shape[0] // self.num_sources

    @property
    def stationary(self):
        return self.lags is not None

    @property
    def zero_lag(self):
        m = self.num_sources
        return self.space_time[:m, :m].copy()

    def lag(self, k):
        """``P_k = E[s(t-k) s(t)^H]``."""
        if self.lags is None:
            raise ScenarioError("lag blocks are only defined for stationary signals")
        if abs(k) >= self.lags.shape[0]:
            raise ScenarioError(f"lag {k} beyond the stored range ({self.lags.shape[0] - 1})")
        return self.lags[k].copy() if k >= 0 else self.lags[-k].conj().T.copy()

    def offset_covariance(self, offsets):
        """Covariance of the stacked samples ``[s(t + tau_1); ...; s(t + tau_K)]``."""
        m = self.num_sources
        k = len(offsets)
        out = np.empty((k * m, k * m), dtype=complex)
        for i, ti in enumerate(offsets):
            for j, tj in enumerate(offsets):
                out[i * m:(i + 1) * m, j * m:(j + 1) * m] = self.lag(tj - ti)
        return out

    def offset_cross(self, offsets):
        """``E[s(t + tau_i) s(t)^H]`` stacked over the offsets (``P_{-tau_i}``)."""
        return np.vstack([self.lag(-t) for t in offsets])

    def stacked_lags(self, M):
        """``[P_1; ...; P_M]``, the cross-covariance of past samples with s(t)."""
        return self.offset_cross(range(-1, -M - 1, -1))

    def two_sided_stack(self, half_width):
        """``[P_{-h}; ...; P_0; ...; P_h]`` (samples t+h down to t-h)."""
        return self.offset_cross(range(half_width, -half_width - 1, -1))

    def block_diagonal(self):
        """Signal covariance with all temporal cross blocks removed."""
        m = self.num_sources
        out = np.zeros_like(self.space_time)
        for i in range(self.n):
            sl = slice(i * m, (i + 1) * m)
            out[sl, sl] = self.space_time[sl, sl]
        return SignalCovariance(out, m, None)

    def truncated(self, n):
        """Same process observed over ``n`` snapshots."""
        if self.lags is None:
            m = self.num_sources
            return SignalCovariance(self.space_time[: n * m, : n * m].copy(), m, None)
        return SignalCovariance.from_lags(self.lags, n)


def build_signal_cov_kronecker(n, m, temporal_decay, spatial_decay, power=1.0):
    """``P_t (x) P_s`` with exponentially decaying temporal and spatial factors.

    ``temporal_decay=inf`` gives ``P_t = I`` (temporally white sources).
    """
    if temporal_decay < 0 or spatial_decay < 0:
        raise ScenarioError("decay rates must be nonnegative")
    ps = power * _exp_decay_matrix(m, spatial_decay)
    k = np.arange(n)
    if np.isinf(temporal_decay):
        r = (k == 0).astype(float)
    else:
        r = np.exp(-temporal_decay * k)
    return SignalCovariance.from_lags(r[:, None, None] * ps[None], n)


def fir_autocorrelation(taps, max_lag):
    """Autocorrelation ``r(0..max_lag)`` of the unit-energy normalized filter."""
    f = np.asarray(taps, dtype=float).ravel()
    if f.size == 0:
        raise ScenarioError("FIR filter needs at least one tap")
    norm = np.linalg.norm(f)
    if norm == 0:
        raise ScenarioError("FIR filter taps are all zero")
    f = f / norm
    r = np.zeros(max_lag + 1)
    for k in range(min(max_lag + 1, f.size)):
        r[k] = np.dot(f[: f.size - k], f[k:])
    return r


def build_signal_cov_fir(n, taps, spatial_cov, power=1.0):
    """Block-Toeplitz covariance of sources driven through a common FIR filter."""
    ps = power * np.atleast_2d(np.asarray(spatial_cov, dtype=complex))
    r = fir_autocorrelation(taps, n - 1)
    return SignalCovariance.from_lags(r[:, None, None] * ps[None], n)


def build_signal_cov_explicit(lags, n):
    """Stationary covariance from explicit lag blocks ``P_0, P_1, ...`` (zero beyond)."""
    return SignalCovariance.from_lags(lags, n)


def snr_noise_power(A, zero_lag, base_noise, snr_db):
    """Noise power giving ``Tr(A P_0 A^H) / Tr(C) = 10^(snr_db/10)``."""
    sig = np.trace(A @ zero_lag @ A.conj().T).real
    base_tr = np.trace(base_noise.spatial_cov).real / base_noise.noise_power
    return sig / (base_tr * 10 ** (snr_db / 10))


def apply_snr(A, zero_lag, base_noise, snr_db):
    """Rescale ``base_noise`` so that the per-sensor SNR equals ``snr_db``."""
    return base_noise.scaled(snr_noise_power(A, zero_lag, base_noise, snr_db))


def measured_snr_db(A, zero_lag, noise):
    sig = np.trace(A @ zero_lag @ A.conj().T).real
    return 10 * np.log10(sig / np.trace(noise.spatial_cov).real)


# ---------------------------------------------------------------------------
# declarative configuration


@dataclass
class ArrayConfig:
    num_sensors: int = 3
    spacing: float = 1.0
    positions: list | None = None
    convention: str = "cosine"

    def build(self):
        if self.positions is not None:
            return ArrayModel(np.asarray(self.positions, float), self.convention)
        return ArrayModel.ula(self.num_sensors, self.spacing, self.convention)


@dataclass
class SignalConfig:
    """One of ``kronecker``, ``fir`` or ``explicit``.

    ``spatial_decay`` sets ``[P_s]_ij = exp(-spatial_decay |i-j|)`` for the
    kronecker and fir kinds. ``explicit`` takes ``lags_re``/``lags_im`` nested
    lists of shape (K, m, m).
    """

    kind: str = "kronecker"
    temporal_decay: float = 0.2
    spatial_decay: float = 0.5
    taps: list | None = None
    lags_re: list | None = None
    lags_im: list | None = None


@dataclass
class ScenarioConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    angles: list = field(default_factory=lambda: [0.0, 0.2])
    power: float = 1.0
    noise_decay: float = 1.0
    signal: SignalConfig = field(default_factory=SignalConfig)
    n: int = 10
    snr_db: float = 10.0

    def validate(self):
        if self.n < 2:
            raise ScenarioError("n must be at least 2")
        if self.signal.kind not in ("kronecker", "fir", "explicit"):
            raise ScenarioError(f"unknown signal kind {self.signal.kind!r}")
        if not self.power > 0:
            raise ScenarioError("source power must be positive")
        return self

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully resolved scenario: geometry, noise at the configured SNR, signal statistics."""

    array: ArrayModel
    sources: SourceSet
    noise: NoiseModel
    signal: SignalCovariance
    snr_db: float
    A: np.ndarray
    D: np.ndarray

    @property
    def n(self):
        return self.signal.n

    @property
    def num_sensors(self):
        return self.array.num_sensors

    @property
    def num_sources(self):
        return self.sources.num_sources

    @property
    def C(self):
        return self.noise.spatial_cov

    def fingerprint(self):
        h = hashlib.sha256()
        for arr in (self.A, self.D, self.C, self.signal.space_time):
            h.update(np.ascontiguousarray(arr, dtype=complex).tobytes())
        return h.hexdigest()[:16]

    def with_signal(self, signal):
        return replace(self, signal=signal)


def build_signal(cfg, n):
    m = len(cfg.angles)
    sig = cfg.signal
    if sig.kind == "kronecker":
        return build_signal_cov_kronecker(n, m, sig.temporal_decay, sig.spatial_decay, cfg.power)
    if sig.kind == "fir":
        if not sig.taps:
            raise ScenarioError("fir signal needs taps")
        ps = _exp_decay_matrix(m, sig.spatial_decay)
        return build_signal_cov_fir(n, sig.taps, ps, cfg.power)
    if sig.lags_re is None:
        raise ScenarioError("explicit signal needs lags_re (and optionally lags_im)")
    lags = np.asarray(sig.lags_re, float) + 1j * np.asarray(
        sig.lags_im if sig.lags_im is not None else np.zeros_like(sig.lags_re), float
    )
    if lags.ndim != 3 or lags.shape[1:] != (m, m):
        raise ScenarioError(f"explicit lags must have shape (K, {m}, {m})")
    return build_signal_cov_explicit(cfg.power * lags, n)


def assemble_scenario(array, sources, base_noise, signal, snr_db):
    """Combine resolved parts, rescaling ``base_noise`` to the requested SNR."""
    A = build_A(array, sources)
    D = build_D(array, sources)
    if signal.num_sources != sources.num_sources:
        raise ScenarioError("signal covariance does not match the number of sources")
    noise = apply_snr(A, signal.zero_lag, base_noise, snr_db)
    return Scenario(array, sources, noise, signal, float(snr_db), A, D)


def build_scenario(cfg):
    """Resolve a :class:`ScenarioConfig` into a :class:`Scenario`."""
    cfg.validate()
    array = cfg.array.build()
    sources = SourceSet(np.asarray(cfg.angles, float))
    signal = build_signal(cfg, cfg.n)
    try:
        if not psd_check(signal.space_time, 1e-10):
            raise ScenarioError("signal space-time covariance is not positive semi-definite")
    except MatrixError as exc:
        raise ScenarioError(str(exc)) from None
    base = build_noise_cov(array.num_sensors, 1.0, cfg.noise_decay)
    return assemble_scenario(array, sources, base, signal, cfg.snr_db)
