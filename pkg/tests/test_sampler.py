import numpy as np
import pytest

from tcdoa.sampler import (
    RngSpec,
    draw_correlated,
    draw_deterministic,
    draw_fir_stream,
    fir_lag_covariances,
    fir_source_stream,
)
from tcdoa.scenario import build_scenario, fir_autocorrelation

from conftest import FIR_TAPS, fir_config, family_limit, moments_match, two_source_config


def test_reproducible_bit_for_bit(fir_scn):
    a = draw_correlated(fir_scn, RngSpec(7, 3)).X
    b = draw_correlated(fir_scn, RngSpec(7, 3)).X
    c = draw_correlated(fir_scn, RngSpec(7, 4)).X
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    f1 = draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(1, 0)).X
    f2 = draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(1, 0)).X
    assert f1.tobytes() == f2.tobytes()


def test_snapshot_metadata(fir_scn):
    s = draw_correlated(fir_scn, RngSpec(5, 2))
    assert s.shape == (4, 100)
    assert (s.seed, s.stream, s.scenario_hash) == (5, 2, fir_scn.fingerprint())
    assert s.generator == "PCG64"


def test_noise_only_draw():
    scn = build_scenario(two_source_config(n=3))
    X = draw_correlated(scn, RngSpec(0), space_time=np.zeros((6, 6)), trials=20000).X
    x = X[:, :, 1]
    assert moments_match(x, x, scn.C)


def test_single_block_draw():
    scn = build_scenario(fir_config(n=1 + 1)).with_signal(
        build_scenario(fir_config(n=2)).signal.truncated(1)
    )
    X = draw_correlated(scn, RngSpec(1), trials=20000).X
    x = X[:, :, 0]
    R = scn.A @ scn.signal.zero_lag @ scn.A.conj().T + scn.C
    assert moments_match(x, x, R)


def test_correlated_lag_one_moment():
    scn = build_scenario(two_source_config(n=3))
    X = draw_correlated(scn, RngSpec(2), trials=20000).X
    # E[x(t-1) x(t)^H] = A P_1 A^H
    theory = scn.A @ scn.signal.lag(1) @ scn.A.conj().T
    assert moments_match(X[:, :, 0], X[:, :, 1], theory)


def test_circularity():
    scn = build_scenario(two_source_config(n=2))
    X = draw_correlated(scn, RngSpec(3), trials=100000).X[:, :, 0]
    # E[x x^T] = 0: compare E[x (x^*)^H] with zero
    assert moments_match(X, X.conj(), np.zeros((3, 3)))


def test_fir_white_taps():
    s = fir_source_stream(RngSpec(4).generator(), [1.0], 2, np.eye(1), trials=100000)
    assert moments_match(s[:, :, 0], s[:, :, 1], [[0.0]])


def test_fir_lag_one_autocorrelation():
    s = fir_source_stream(RngSpec(5).generator(), FIR_TAPS, 2, np.eye(1), trials=100000)
    r1 = fir_autocorrelation(FIR_TAPS, 1)[1]
    assert r1 == pytest.approx(0.5252, abs=1e-4)
    assert moments_match(s[:, :, 0], s[:, :, 1], [[r1]])
    assert moments_match(s[:, :, 0], s[:, :, 0], [[1.0]])


def test_fir_stream_matches_block_covariance(fir_scn):
    X = draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(6), n=3, trials=50000).X
    Y = draw_correlated(fir_scn.with_signal(fir_scn.signal.truncated(3)), RngSpec(7), trials=50000).X
    lags = fir_lag_covariances(fir_scn, FIR_TAPS, 2)
    for k in range(3):
        assert moments_match(X[:, :, 0], X[:, :, k], lags[k])
        assert moments_match(Y[:, :, 0], Y[:, :, k], lags[k])


def test_deterministic_draws(two_source):
    rng = np.random.default_rng(0)
    S = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    X = draw_deterministic(two_source, S, RngSpec(8), trials=10000).X
    mean = X.mean(axis=0)
    se = X.std(axis=0) / np.sqrt(10000)
    z = np.abs(mean - two_source.A @ S) / se
    assert z.max() < family_limit(z.size)
    v = X - two_source.A @ S
    assert moments_match(v[:, :, 0], v[:, :, 0], two_source.C)
    tiny = two_source.with_signal(two_source.signal)
    exact = two_source.A @ S
    quiet = draw_deterministic(
        type(tiny)(tiny.array, tiny.sources, tiny.noise.scaled(1e-30), tiny.signal, 300.0, tiny.A, tiny.D),
        S, RngSpec(9),
    ).X
    assert np.allclose(quiet, exact, atol=1e-12)
