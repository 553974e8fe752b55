import dataclasses

import numpy as np
import pytest

from tcdoa.bounds import instrument_moments
from tcdoa.ivssf import (
    IvConfig,
    IvError,
    build_instrument,
    criterion,
    criterion_grid,
    estimate,
    estimate_from_statistics,
    fine_grid,
    grid_search_2d,
    instrument_matrix,
    sample_statistics,
    statistics_from_moments,
)
from tcdoa.matstack import kron
from tcdoa.sampler import RngSpec, draw_correlated, draw_fir_stream
from tcdoa.scenario import ArrayConfig, ScenarioConfig, SignalConfig, build_scenario

from conftest import FIR_TAPS, fir_config, moments_match


def labelled(L=2, n=8):
    # column t holds the value t + 1 in every row, so x(k) is recognisable
    return np.tile(np.arange(1, n + 1, dtype=complex), (L, 1))


def firsts(v, L=2):
    return [int(v[i].real) for i in range(0, v.size, L)]


def test_one_sided_instrument_order():
    cfg = IvConfig(M=2, variant="one-sided")
    # one-based t=3 is zero-based t=2: [x(2); x(1)]
    assert firsts(build_instrument(labelled(), 2, cfg)) == [2, 1]


def test_two_sided_instrument_order():
    assert firsts(build_instrument(labelled(), 2, IvConfig(M=2, variant="two-sided"))) == [4, 2]
    assert firsts(build_instrument(labelled(), 4, IvConfig(M=4, variant="two-sided"))) == [7, 6, 4, 3]


def test_instrument_range_errors():
    one = IvConfig(M=2)
    two = IvConfig(M=4, variant="two-sided")
    with pytest.raises(IndexError):
        build_instrument(labelled(), 1, one)
    with pytest.raises(IndexError):
        build_instrument(labelled(), 6, two)
    build_instrument(labelled(), 7, one)
    build_instrument(labelled(), 5, two)


def test_both_variants_average_n_minus_m_terms():
    X = labelled(n=20)
    for cfg in (IvConfig(M=4), IvConfig(M=4, variant="two-sided")):
        phi, x = instrument_matrix(X, cfg)
        assert phi.shape == (8, 16) and x.shape == (2, 16)


def test_config_validation():
    with pytest.raises(ValueError):
        IvConfig(M=3, variant="two-sided")
    with pytest.raises(ValueError):
        IvConfig(M=1)
    with pytest.raises(ValueError):
        IvConfig(coarse_step=0.001, fine_step=0.01)
    with pytest.raises(ValueError):
        IvConfig(variant="both")
    with pytest.raises(ValueError):
        IvConfig(M=4).check_length(8)


def test_single_term_statistics(rng):
    X = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    cfg = IvConfig(M=2)
    phi = np.concatenate([X[:, 1], X[:, 0]])
    sig = np.outer(phi, X[:, 2].conj())
    phi_cols, x_cols = instrument_matrix(X, cfg)
    assert np.allclose(phi_cols[:, 0], phi)
    assert np.allclose(phi_cols @ x_cols.conj().T, sig)
    # rank one: the sample instrument covariance cannot be inverted
    with pytest.raises(IvError):
        sample_statistics(X, cfg)


def test_sigma_converges_to_signal_moment(fir_scn):
    # one valid t per draw (n = M + 1), many independent draws
    X = draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(11), n=3, trials=100000).X
    phi = np.concatenate([X[:, :, 1], X[:, :, 0]], axis=1)
    J, _ = instrument_moments(fir_scn, 2)
    theory = kron(np.eye(2), fir_scn.A) @ J @ fir_scn.A.conj().T
    assert moments_match(phi, X[:, :, 2], theory)
    # noise contributes nothing to Sigma in expectation
    short = fir_scn.with_signal(fir_scn.signal.truncated(3))
    Xn = draw_correlated(short, RngSpec(12), space_time=np.zeros((3, 3)), trials=100000).X
    phin = np.concatenate([Xn[:, :, 1], Xn[:, :, 0]], axis=1)
    assert moments_match(phin, Xn[:, :, 2], np.zeros((8, 4)))


def exact_statistics(scn, cfg):
    J, Phi = instrument_moments(scn, cfg.M, cfg.variant)
    sigma = kron(np.eye(cfg.M), scn.A) @ J @ scn.A.conj().T
    return statistics_from_moments(sigma, Phi, cfg)


@pytest.mark.parametrize("variant", ["one-sided", "two-sided"])
def test_exact_statistics_recover_truth(variant):
    scn = build_scenario(fir_config(snr_db=10.0))
    cfg = IvConfig(M=2, variant=variant)
    st = exact_statistics(scn, cfg)
    assert criterion([0.8], st, scn.array.positions) == pytest.approx(0.0, abs=1e-10)
    est = estimate_from_statistics(st, cfg, scn.array.positions)
    assert abs(est.omega[0] - 0.8) <= cfg.fine_step
    vals = criterion_grid(np.linspace(-3, 3, 301), st, scn.array.positions)
    assert np.all(vals >= 0)


def test_criterion_scale_invariance(fir_scn):
    cfg = IvConfig(M=2)
    X = draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(3)).X
    st = sample_statistics(X, cfg)
    scaled = dataclasses.replace(st, r0=st.r0 * 7.0)
    a = estimate_from_statistics(st, cfg, fir_scn.array.positions)
    b = estimate_from_statistics(scaled, cfg, fir_scn.array.positions)
    assert np.array_equal(a.omega, b.omega)


def test_typical_draw_near_truth(fir_scn):
    for variant in ("one-sided", "two-sided"):
        cfg = IvConfig(M=2, variant=variant)
        errs = [estimate(draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(21, k)).X, cfg,
                         fir_scn.array.positions).omega[0] - 0.8 for k in range(20)]
        assert np.median(np.abs(errs)) < 0.1


def test_deterministic_estimate(fir_scn):
    X = draw_fir_stream(fir_scn, FIR_TAPS, RngSpec(4)).X
    cfg = IvConfig(M=2, variant="two-sided")
    a = estimate(X, cfg, fir_scn.array.positions)
    b = estimate(X, cfg, fir_scn.array.positions)
    assert a.omega.tobytes() == b.omega.tobytes() and a.criterion == b.criterion


def test_equal_instrument_dimension():
    X = labelled(L=4, n=50)
    a, _ = instrument_matrix(X, IvConfig(M=4))
    b, _ = instrument_matrix(X, IvConfig(M=4, variant="two-sided"))
    assert a.shape == b.shape


def test_fine_grid_spans_coarse_step():
    cfg = IvConfig()
    g = fine_grid(0.5, cfg)
    assert g.size == 21
    assert g[0] == pytest.approx(0.49) and g[-1] == pytest.approx(0.51)


def test_rank_deficient_candidate_is_infinite(fir_scn):
    cfg = IvConfig(M=2, num_sources=2)
    st = exact_statistics(
        build_scenario(ScenarioConfig(
            array=ArrayConfig(num_sensors=4, convention="electrical"), angles=[0.3, 1.2],
            signal=SignalConfig(kind="fir", taps=FIR_TAPS), n=50, snr_db=10.0)),
        cfg,
    )
    assert criterion([0.5, 0.5], st, np.arange(4)) == np.inf


def test_two_source_search_matches_2d_oracle():
    scn = build_scenario(ScenarioConfig(
        array=ArrayConfig(num_sensors=4, convention="electrical"), angles=[0.3, 1.2],
        signal=SignalConfig(kind="fir", taps=FIR_TAPS, spatial_decay=1.0), n=50, snr_db=10.0))
    cfg = IvConfig(M=2, num_sources=2)
    st = exact_statistics(scn, cfg)
    est = estimate_from_statistics(st, cfg, scn.array.positions)
    assert np.allclose(np.sort(est.omega), [0.3, 1.2], atol=cfg.fine_step)
    grid = np.round(np.arange(-1.0, 2.0, 0.05), 10)
    w, _ = grid_search_2d(st, scn.array.positions, grid)
    assert np.allclose(w, [0.3, 1.2], atol=1e-9)
    assert est.sweeps >= 1
