import numpy as np
import pytest
from scipy.stats import norm

from tcdoa.scenario import ArrayConfig, ScenarioConfig, SignalConfig, build_scenario

FIR_TAPS = [1.0, 0.5, 0.3, 0.2, 0.1]


def two_source_config(n=10, snr_db=10.0):
    """Two sources at 0 and 0.2 rad, 3-sensor half-wavelength ULA, Kronecker P."""
    return ScenarioConfig(
        array=ArrayConfig(num_sensors=3, spacing=1.0, convention="sine"),
        angles=[0.0, 0.2],
        signal=SignalConfig(kind="kronecker", temporal_decay=0.2, spatial_decay=0.5),
        n=n,
        snr_db=snr_db,
    )


def fir_config(n=100, snr_db=0.0):
    """Single source at omega = 0.8, 4-sensor ULA, FIR-filtered source."""
    return ScenarioConfig(
        array=ArrayConfig(num_sensors=4, spacing=1.0, convention="electrical"),
        angles=[0.8],
        signal=SignalConfig(kind="fir", taps=list(FIR_TAPS)),
        n=n,
        snr_db=snr_db,
    )


@pytest.fixture
def two_source():
    return build_scenario(two_source_config())


@pytest.fixture
def fir_scn():
    return build_scenario(fir_config())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hpd(rng, size):
    g = random_complex(rng, size, size)
    return g @ g.conj().T + 0.5 * np.eye(size)


def max_zscore(u, v, theory):
    """Largest |mean - theory| / SE over entries of E[u v^H], real and imaginary parts.

    ``u`` and ``v`` hold independent sample vectors along axis 0. When ``u``
    is ``v`` the estimate is Hermitian, so only the upper triangle is scored
    (mirrored entries are the same statistic) and zero-variance parts such
    as the imaginary diagonal must match exactly.
    """
    prods = u[:, :, None] * v[:, None, :].conj()
    k = prods.shape[0]
    mean = prods.mean(axis=0)
    keep = np.triu(np.ones(mean.shape, bool)) if u is v else np.ones(mean.shape, bool)
    z = []
    for part in (np.real, np.imag):
        se = part(prods).std(axis=0, ddof=1)[keep] / np.sqrt(k)
        dev = np.abs(part(mean) - part(np.asarray(theory)))[keep]
        pos = se > 0
        z.append(np.where(pos, dev / np.where(pos, se, 1), np.where(dev > 1e-12, np.inf, 0)))
    z = np.concatenate(z)
    return float(np.max(z)), int(z.size)


def family_limit(count, sigmas=3.0):
    """Per-entry z limit keeping the family-wise miss rate of a single ``sigmas`` check."""
    alpha = 2 * norm.sf(sigmas)
    return float(norm.isf(alpha / (2 * count)))


def moments_match(u, v, theory):
    z, count = max_zscore(u, v, theory)
    return z < family_limit(count)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    """Print and remember one acceptance verdict line."""
    line = f"[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
