"""Randomized verification of the bound orderings and matrix identities.

Each scenario draws a random array size, source count, noise covariance and a
stationary vector moving-average signal, then evaluates every check below.
Violations are relative: identity checks use ``max|x - y| / max|y|``; PSD
checks use ``max(0, -lambda_min(diff)) / ||reference||_2``.

Scenarios whose conditioning makes 1e-9 comparisons meaningless are screened
out and counted instead of checked (see :data:`COND_K_MAX` and
:data:`COND_R_MAX`).
"""

from dataclasses import dataclass, field

import numpy as np

from ..bounds import (
    SingularBoundError,
    cor_signal_term,
    crb_cor,
    crb_cor_via_identity,
    crb_det,
    crb_iid,
    instrument_moments,
    instrument_offsets,
    ivssf_information,
    linear_estimation_error,
    noise_information,
    projector_cache,
)
from ..matstack import herm_sqrt_inv, hpd_inverse, kron, rel_err, solve_hpd
from ..sampler import RngSpec
from ..scenario import ArrayModel, NoiseModel, SignalCovariance, SourceSet, assemble_scenario

# conditioning screen
# Fisher-type brackets inherit roughly cond(K)^2 * eps of error, so 1e5 keeps
# the 1e-9 checks meaningful; random scenarios stay below ~2e4.
COND_K_MAX = 1e5  # cond(A^H C^-1 A)
COND_R_MAX = 1e10  # cond of the nL x nL data covariance

IDENTITY_TOL = 1e-9
ORDER_TOL = 1e-9
PROJECTOR_TOL = 1e-10
IID_LIMIT_TOL = 1e-10

CHECKS = {
    "inverse_dual_path": IDENTITY_TOL,
    "whitened_vs_direct": IDENTITY_TOL,
    "whitening_identity": IDENTITY_TOL,
    "inversion_identity": IDENTITY_TOL,
    "ivssf_reduction": IDENTITY_TOL,
    "order_iid_ge_cor": ORDER_TOL,
    "order_cor_ge_det": ORDER_TOL,
    "signal_term_le_P": ORDER_TOL,
    "block_diagonal_ge": ORDER_TOL,
    "monotone_in_n": ORDER_TOL,
    "projector_idempotent": PROJECTOR_TOL,
    "projector_hermitian": PROJECTOR_TOL,
    "projector_annihilates": PROJECTOR_TOL,
    "iid_limit_equality": IID_LIMIT_TOL,
}


@dataclass
class CheckResult:
    name: str
    tolerance: float
    max_violation: float = 0.0
    evaluated: int = 0

    @property
    def passed(self):
        return self.evaluated > 0 and self.max_violation <= self.tolerance


@dataclass
class SuiteReport:
    seed: int
    requested: int
    checks: dict = field(default_factory=dict)
    rejected: list = field(default_factory=list)  # (index, reason)

    @property
    def evaluated(self):
        return self.requested - len(self.rejected)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def lines(self):
        out = [f"theorem suite: seed={self.seed} scenarios={self.requested} "
               f"evaluated={self.evaluated} rejected={len(self.rejected)}"]
        for c in self.checks.values():
            flag = "PASS" if c.passed else "FAIL"
            out.append(f"  {flag} {c.name:<24s} max violation {c.max_violation:.3e} "
                       f"(tol {c.tolerance:.0e}, n={c.evaluated})")
        for idx, why in self.rejected:
            out.append(f"  rejected scenario {idx}: {why}")
        return out


def _psd_violation(diff, ref):
    diff = (diff + diff.conj().T) / 2
    lam = np.linalg.eigvalsh(diff).min()
    scale = np.linalg.norm(ref, 2)
    return max(0.0, -lam) / scale


def _random_pd(rng, size, floor=0.1):
    g = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    c = g @ g.conj().T / size + floor * np.eye(size)
    return c / np.trace(c).real * size


def _random_lags(rng, m, order):
    """``P_k = sum_i B_i B_{i+k}^H`` for a random vector MA(order) plus a white part."""
    taps = (rng.standard_normal((order + 1, m, m)) + 1j * rng.standard_normal((order + 1, m, m))) / np.sqrt(2 * m)
    lags = np.zeros((order + 1, m, m), dtype=complex)
    for k in range(order + 1):
        for i in range(order + 1 - k):
            lags[k] += taps[i] @ taps[i + k].conj().T
    lags[0] += 0.1 * np.eye(m)
    return lags


def _random_angles(rng, m, min_gap):
    while True:
        w = np.sort(rng.uniform(-2.5, 2.5, m))
        if m == 1 or np.diff(w).min() >= min_gap:
            return w


def random_scenario(seed, index, angle_gap=None):
    """Random stationary scenario number ``index`` (electrical angles).

    ``angle_gap`` forces the first two sources to be that close (adversarial
    near-coherent case); it needs ``m >= 2``.
    """
    rng = RngSpec(seed, index).generator()
    L = int(rng.integers(2, 6))
    m = int(rng.integers(1, L))
    if angle_gap is not None:
        m = max(m, 2)
        L = max(L, m + 1)
    n = int(rng.integers(2, 7))
    w = _random_angles(rng, m, 0.2)
    if angle_gap is not None:
        w[1] = w[0] + angle_gap
    array = ArrayModel.ula(L, convention="electrical")
    sources = SourceSet(w)
    signal = SignalCovariance.from_lags(_random_lags(rng, m, int(rng.integers(2, 4))), n)
    noise = NoiseModel(_random_pd(rng, L), 1.0)
    return assemble_scenario(array, sources, noise, signal, float(rng.uniform(-10, 20)))


def screen(scn):
    """Reason string if ``scn`` is too ill-conditioned to check, else ``None``."""
    ck = np.linalg.cond(noise_information(scn))
    if not ck < COND_K_MAX:
        return f"cond(A^H C^-1 A) = {ck:.2e} exceeds {COND_K_MAX:.0e}"
    n = scn.n
    aa = kron(np.eye(n), scn.A)
    rr = aa @ scn.signal.space_time @ aa.conj().T + kron(np.eye(n), scn.C)
    cr = np.linalg.cond(rr)
    if not cr < COND_R_MAX:
        return f"cond(R) = {cr:.2e} exceeds {COND_R_MAX:.0e}"
    return None


def scenario_checks(scn):
    """Violation of every check on one scenario, keyed as in :data:`CHECKS`."""
    out = {}
    n = scn.n
    A, C = scn.A, scn.C
    pp = scn.signal.space_time
    eye_n = np.eye(n)
    K = noise_information(scn)

    aa = kron(eye_n, A)
    rr = aa @ pp @ aa.conj().T + kron(eye_n, C)
    inner = aa.conj().T @ solve_hpd(rr, aa)

    # P AA^H RR^-1 AA P = P - (P^-1 + I (x) K)^-1, and the bound built on each side
    lhs = pp @ inner @ pp
    rhs = pp - hpd_inverse(hpd_inverse(pp) + kron(eye_n, K))
    cor = crb_cor(scn, path="direct").matrix
    out["inverse_dual_path"] = max(rel_err(lhs, rhs), rel_err(crb_cor_via_identity(scn).matrix, cor))

    wh = cor_signal_term(scn, path="whitened")
    out["whitened_vs_direct"] = rel_err(wh, cor_signal_term(scn, path="direct"))

    g = kron(eye_n, herm_sqrt_inv(C) @ A)
    rw = g @ pp @ g.conj().T + np.eye(g.shape[0])
    out["whitening_identity"] = rel_err(g.conj().T @ solve_hpd(rw, g), inner)

    out["inversion_identity"] = max(
        rel_err(hpd_inverse(pp + kron(eye_n, hpd_inverse(K))), inner),
        rel_err(crb_cor(scn, path="reduced").matrix, cor),
    )

    M = 2
    J, Phi = instrument_moments(scn, M)
    info = ivssf_information(scn, J, Phi)
    sigma_e = linear_estimation_error(scn, instrument_offsets(M))
    out["ivssf_reduction"] = rel_err(scn.signal.zero_lag - sigma_e, info)

    det, iid = crb_det(scn).matrix, crb_iid(scn).matrix
    out["order_iid_ge_cor"] = _psd_violation(iid - cor, iid)
    out["order_cor_ge_det"] = _psd_violation(cor - det, iid)
    out["signal_term_le_P"] = _psd_violation(pp - lhs, pp)

    cor_d = crb_cor(scn, scn.signal.block_diagonal().space_time).matrix
    out["block_diagonal_ge"] = _psd_violation(cor_d - cor, cor_d)

    longer = scn.with_signal(scn.signal.truncated(n + 1))
    cor_next = crb_cor(longer).matrix
    out["monotone_in_n"] = _psd_violation(cor - cor_next, cor)

    cache = projector_cache(A, scn.D, C)
    pr = cache.projector
    out["projector_idempotent"] = np.abs(pr @ pr - pr).max()
    out["projector_hermitian"] = np.abs(pr - pr.conj().T).max()
    ga = cache.noise_isqrt @ A
    out["projector_annihilates"] = np.abs(pr @ ga).max() / np.abs(ga).max()

    white = scn.with_signal(SignalCovariance.from_lags(scn.signal.zero_lag[None], n))
    out["iid_limit_equality"] = rel_err(crb_cor(white).matrix, crb_iid(white).matrix)
    return out


def run_theorem_suite(seed=0, count=100, adversarial=0, angle_gap=1e-3):
    """Evaluate every check on ``count`` random scenarios.

    ``adversarial`` extra scenarios place two sources ``angle_gap`` apart;
    these either pass or are screened out as ill-conditioned. Failures are
    recorded in the report, never raised.
    """
    report = SuiteReport(seed, count + adversarial)
    report.checks = {k: CheckResult(k, tol) for k, tol in CHECKS.items()}
    for idx in range(count + adversarial):
        gap = angle_gap if idx >= count else None
        scn = random_scenario(seed, idx, gap)
        why = screen(scn)
        if why is None:
            try:
                viol = scenario_checks(scn)
            except (SingularBoundError, np.linalg.LinAlgError) as exc:
                why = f"singular matrix: {exc}"
        if why is not None:
            report.rejected.append((idx, why))
            continue
        for name, v in viol.items():
            c = report.checks[name]
            c.max_violation = max(c.max_violation, float(v))
            c.evaluated += 1
    return report
