"""Cramer-Rao bounds on the direction parameters and related matrix identities.

All bounds share the form ``scale * inv(Re(H o B^T))`` where ``H`` is the
whitened steering-derivative factor ``D^H C^-1/2 Pi C^-1/2 D`` and ``B`` is a
model-specific ``m x m`` signal term:

* deterministic: ``B = P``, scale ``1/(2n)``
* iid:           ``B = P A^H R^-1 A P``, scale ``1/(2n)``
* correlated:    ``B = BTr_m(PP AA^H RR^-1 AA PP)``, scale ``1/2``

with ``PP`` the space-time signal covariance, ``AA = I_n (x) A`` and
``RR = AA PP AA^H + I_n (x) C``. The bound is in squared units of whatever
parameter the scenario's array convention uses (theta, or omega for the
``electrical`` convention).
"""

from dataclasses import dataclass

import numpy as np

from .matstack import (
    MatrixError,
    NotPositiveDefiniteError,
    block_trace,
    herm_sqrt_inv,
    hermitize,
    hpd_inverse,
    kron,
    solve_hpd,
)

__all__ = [
    "SingularBoundError",
    "CrbResult",
    "ProjectorCache",
    "projector_cache",
    "noise_information",
    "crb_det",
    "crb_iid",
    "crb_cor",
    "cor_signal_term",
    "crb_cor_via_identity",
    "crb_cor_high_snr",
    "crb_cor_low_snr",
    "instrument_offsets",
    "instrument_moments",
    "ivssf_information",
    "ivssf_asymptotic_cov",
    "linear_estimation_error",
    "smoother_error_covs",
]

# direct evaluation of the nL x nL data covariance is used up to this size
DIRECT_MAX_DIM = 1200


class SingularBoundError(np.linalg.LinAlgError):
    """The Fisher-type bracket of a bound is singular or not positive definite."""


@dataclass(frozen=True, eq=False)
class CrbResult:
    matrix: np.ndarray
    model: str
    n: int
    scenario_hash: str = ""

    @property
    def diag(self):
        return np.diag(self.matrix).copy()

    @property
    def std(self):
        """Square root of the diagonal (per-parameter standard deviation bound)."""
        return np.sqrt(self.diag)


@dataclass(frozen=True, eq=False)
class ProjectorCache:
    projector: np.ndarray  # Pi_0^perp, L x L
    derivative_factor: np.ndarray  # D^H C^-1/2 Pi C^-1/2 D, m x m Hermitian
    noise_isqrt: np.ndarray  # C^-1/2

    @property
    def real_factor(self):
        return self.derivative_factor.real


def projector_cache(A, D, C):
    """Whitened orthogonal projector and steering-derivative factor."""
    w = herm_sqrt_inv(C)
    g = w @ A
    proj = np.eye(A.shape[0]) - g @ solve_hpd(g.conj().T @ g, g.conj().T)
    proj = hermitize(proj)
    wd = w @ D
    return ProjectorCache(proj, hermitize(wd.conj().T @ proj @ wd), w)


def noise_information(scn):
    """``K = A^H C^-1 A`` (the per-snapshot signal information)."""
    return hermitize(scn.A.conj().T @ solve_hpd(scn.C, scn.A))


def _cache(scn):
    return projector_cache(scn.A, scn.D, scn.C)


def _bound(cache, signal_term, scale, model, n, scn):
    bracket = (cache.derivative_factor * np.asarray(signal_term).T).real
    bracket = (bracket + bracket.T) / 2
    try:
        inv = hpd_inverse(bracket).real
    except NotPositiveDefiniteError as exc:
        raise SingularBoundError(
            f"{model} bound: Fisher bracket is singular or indefinite "
            f"(smallest eigenvalue {exc.eigenvalue:.3e})"
        ) from None
    return CrbResult(scale * (inv + inv.T) / 2, model, int(n), scn.fingerprint())


def crb_det(scn, P=None, n=None):
    """Deterministic-signal bound ``1/(2n) inv(Re(H o P^T))``."""
    P = scn.signal.zero_lag if P is None else np.asarray(P)
    n = scn.n if n is None else n
    return _bound(_cache(scn), P, 1.0 / (2 * n), "det", n, scn)


def crb_iid(scn, P=None, n=None):
    """iid stochastic-signal bound with ``R = A P A^H + C``."""
    P = scn.signal.zero_lag if P is None else np.asarray(P)
    n = scn.n if n is None else n
    A = scn.A
    R = A @ P @ A.conj().T + scn.C
    term = hermitize(P @ A.conj().T @ solve_hpd(R, A @ P))
    return _bound(_cache(scn), term, 1.0 / (2 * n), "iid", n, scn)


def _space_time(scn, space_time):
    pp = scn.signal.space_time if space_time is None else np.asarray(space_time)
    m = scn.num_sources
    if pp.shape[0] % m or pp.shape[0] != pp.shape[1]:
        raise MatrixError(f"space-time signal covariance of shape {pp.shape} does not fit m={m}")
    return pp, pp.shape[0] // m


def cor_signal_term(scn, space_time=None, path="direct"):
    """``BTr_m(PP AA^H RR^-1 AA PP)`` evaluated along one of three routes.

    ``direct`` forms the nL x nL covariance ``RR`` and solves with it.
    ``whitened`` goes through ``G = CC^-1/2 AA`` and ``RR' = G PP G^H + I``.
    ``reduced`` uses ``AA^H RR^-1 AA = (PP + I_n (x) K^-1)^-1`` with
    ``K = A^H C^-1 A`` and never forms an nL x nL matrix.
    """
    pp, n = _space_time(scn, space_time)
    m = scn.num_sources
    A, C = scn.A, scn.C
    if path == "direct":
        aa = kron(np.eye(n), A)
        rr = aa @ pp @ aa.conj().T + kron(np.eye(n), C)
        inner = aa.conj().T @ solve_hpd(rr, aa)
    elif path == "whitened":
        g = kron(np.eye(n), herm_sqrt_inv(C) @ A)
        rr = g @ pp @ g.conj().T + np.eye(g.shape[0])
        inner = g.conj().T @ solve_hpd(rr, g)
    elif path == "reduced":
        kinv = hpd_inverse(noise_information(scn))
        inner = hpd_inverse(pp + kron(np.eye(n), kinv))
    else:
        raise ValueError(f"unknown evaluation path {path!r}")
    return hermitize(block_trace(pp @ inner @ pp, m))


def crb_cor(scn, space_time=None, path="auto"):
    """Temporally correlated bound ``1/2 inv(Re(H o BTr_m(PP AA^H RR^-1 AA PP)^T))``.

    No inverse of the signal covariance is needed, so rank-deficient
    ``space_time`` is allowed.
    """
    pp, n = _space_time(scn, space_time)
    if path == "auto":
        path = "direct" if n * scn.num_sensors <= DIRECT_MAX_DIM else "reduced"
    term = cor_signal_term(scn, pp, path)
    return _bound(_cache(scn), term, 0.5, "cor", n, scn)


def crb_cor_via_identity(scn, space_time=None):
    """Same bound through ``PP - (PP^-1 + I_n (x) K)^-1``; needs an invertible ``PP``."""
    pp, n = _space_time(scn, space_time)
    try:
        pinv = hpd_inverse(pp)
    except NotPositiveDefiniteError:
        raise SingularBoundError(
            "signal space-time covariance is singular; use crb_cor, which does not invert it"
        ) from None
    k = kron(np.eye(n), noise_information(scn))
    term = block_trace(pp - hpd_inverse(pinv + k), scn.num_sources)
    return _bound(_cache(scn), hermitize(term), 0.5, "cor", n, scn)


def crb_cor_high_snr(scn, space_time=None):
    """High-SNR approximation: signal term ``BTr_m(PP - I_n (x) K^-1)``.

    Only the diagonal blocks of ``PP`` enter.
    """
    pp, n = _space_time(scn, space_time)
    kinv = hpd_inverse(noise_information(scn))
    term = block_trace(pp, scn.num_sources) - n * kinv
    return _bound(_cache(scn), hermitize(term), 0.5, "cor", n, scn)


def crb_cor_low_snr(scn, space_time=None):
    """Low-SNR approximation: signal term ``sum_{i,r} (A PP^{ri})^H C^-1 (A PP^{ri})``."""
    pp, n = _space_time(scn, space_time)
    m = scn.num_sources
    A = scn.A
    cinv_a = solve_hpd(scn.C, A)
    term = np.zeros((m, m), dtype=complex)
    for i in range(n):
        for r in range(n):
            blk = pp[r * m:(r + 1) * m, i * m:(i + 1) * m]
            term += (A @ blk).conj().T @ (cinv_a @ blk)
    return _bound(_cache(scn), hermitize(term), 0.5, "cor", n, scn)


# ---------------------------------------------------------------------------
# IV-SSF asymptotics


def instrument_offsets(M, variant="one-sided"):
    """Time offsets of the stacked instrument snapshots relative to t.

    One-sided: ``t-1, ..., t-M``. Two-sided: ``t+M/2, ..., t+1, t-1, ..., t-M/2``.
    """
    if M < 1:
        raise ValueError("M must be positive")
    if variant == "one-sided":
        return list(range(-1, -M - 1, -1))
    if variant == "two-sided":
        if M % 2:
            raise ValueError("two-sided instruments need an even M")
        h = M // 2
        return list(range(h, 0, -1)) + list(range(-1, -h - 1, -1))
    raise ValueError(f"unknown instrument variant {variant!r}")


def instrument_moments(scn, M, variant="one-sided"):
    """Exact ``(J, Phi)`` for the instrument vector.

    ``J`` stacks ``E[s(t+tau) s(t)^H]`` over the instrument offsets (``[P_1..P_M]``
    for the one-sided case) and ``Phi = E[phi(t) phi(t)^H]``.
    """
    offs = instrument_offsets(M, variant)
    sig = scn.signal
    am = kron(np.eye(M), scn.A)
    phi = am @ sig.offset_covariance(offs) @ am.conj().T + kron(np.eye(M), scn.C)
    return sig.offset_cross(offs), hermitize(phi)


def ivssf_information(scn, J, Phi):
    """``J^H AA_M^H Phi^-1 AA_M J`` (the signal term of the IV-SSF covariance)."""
    m = scn.num_sources
    M = J.shape[0] // m
    aj = kron(np.eye(M), scn.A) @ J
    try:
        return hermitize(aj.conj().T @ solve_hpd(Phi, aj))
    except NotPositiveDefiniteError:
        raise SingularBoundError("instrument covariance Phi is singular") from None


def ivssf_asymptotic_cov(scn, J=None, Phi=None, M=2, n=None, variant="one-sided"):
    """Large-sample IV-SSF error covariance ``1/(2n) inv(Re(H o (J^H AA_M^H Phi^-1 AA_M J)^T))``.

    ``J`` and ``Phi`` default to the exact moments of the scenario for the
    chosen instrument variant. White sources give ``J = 0`` and raise
    :class:`SingularBoundError`.
    """
    if J is None or Phi is None:
        J0, Phi0 = instrument_moments(scn, M, variant)
        J = J0 if J is None else J
        Phi = Phi0 if Phi is None else Phi
    n = scn.n if n is None else n
    term = ivssf_information(scn, np.asarray(J), np.asarray(Phi))
    return _bound(_cache(scn), term, 1.0 / (2 * n), "ivssf", n, scn)


def linear_estimation_error(scn, offsets, signal=None):
    """Error covariance of the best linear estimate of s(t) from ``z(t + tau)``.

    ``z(t) = s(t) + w(t)`` with ``w`` temporally white of spatial covariance
    ``K^-1 = (A^H C^-1 A)^-1``. Returns
    ``P_0 - J^H (P_tau + I (x) K^-1)^-1 J``.
    """
    sig = scn.signal if signal is None else signal
    kinv = hpd_inverse(noise_information(scn))
    J = sig.offset_cross(offsets)
    cov = sig.offset_covariance(offsets) + kron(np.eye(len(offsets)), kinv)
    try:
        gain = solve_hpd(cov, J)
    except NotPositiveDefiniteError:
        raise SingularBoundError("observation covariance of the linear estimator is singular") from None
    return hermitize(sig.zero_lag - J.conj().T @ gain)


def smoother_error_covs(scn, M, window=None, signal=None, include_present=True):
    """Prediction and smoothing error covariances ``(Sigma_e, Sigma_eps)``.

    ``Sigma_e`` estimates s(t) from ``z(t-1), ..., z(t-M)``; ``Sigma_eps``
    from the two-sided window ``z(t-window), ..., z(t+window)``. The window
    includes z(t) unless ``include_present`` is false. ``window`` defaults
    to ``M``.
    """
    window = M if window is None else window
    pred = linear_estimation_error(scn, list(range(-1, -M - 1, -1)), signal)
    offs = [k for k in range(window, -window - 1, -1) if include_present or k != 0]
    smooth = linear_estimation_error(scn, offs, signal)
    return pred, smooth
