import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vnmeasure.ensembles import (DensityMatrix, EnsembleConfig, HermitianObservable, Measure,
                                 gue_batch, haar_batch, pure_state_batch, purity_batch,
                                 sample_gue, sample_haar_unitary, sample_state,
                                 semicircle_cdf, semicircle_pdf, semicircle_radius,
                                 spectral_ks, state_batch)
from vnmeasure.streams import spawn, stream


def test_measure_parse_aliases():
    assert Measure.parse("HS") is Measure.HILBERT_SCHMIDT
    assert Measure.parse("hilbert-schmidt") is Measure.HILBERT_SCHMIDT
    assert Measure.parse("Bures") is Measure.BURES
    with pytest.raises(ValueError):
        Measure.parse("haar")


def test_config_derived_counts():
    cfg = EnsembleConfig(N_uno=3, M=2, N_mac=4)
    assert cfg.N_obs == 8
    assert cfg.N == 11
    assert EnsembleConfig(eta_S=4.0, eta_E=1.0).g == 0.5


def test_config_roundtrip(tmp_path):
    cfg = EnsembleConfig(d=5, d_S=3, eta_E=2.0, N_uno=4, M=2, N_mac=3, measure="hs",
                         master_seed=7)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert EnsembleConfig.from_json(path) == cfg


@pytest.mark.parametrize("bad", [dict(d=1), dict(d_S=1), dict(eta_E=0.0), dict(eta_S=-1.0),
                                 dict(N_uno=-1), dict(M=0), dict(N_mac=0),
                                 dict(master_seed=2**64)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        EnsembleConfig(**bad)


def test_config_rejects_inconsistent_counts():
    with pytest.raises(ValueError):
        EnsembleConfig.from_dict({"M": 2, "N_mac": 3, "N_obs": 5})
    with pytest.raises(ValueError):
        EnsembleConfig.from_dict({"N_uno": 1, "N": 9})
    with pytest.raises(ValueError):
        EnsembleConfig.from_dict({"colour": "red"})


def test_streams_are_reproducible_and_distinct():
    a = stream(3, 1).standard_normal(5)
    b = stream(3, 1).standard_normal(5)
    c = stream(3, 2).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert len(spawn(3, 4)) == 4


def test_gue_moments():
    eta = 2.5
    h = gue_batch(stream(0), 40000, 3, eta)
    np.testing.assert_allclose(h, np.conj(np.swapaxes(h, 1, 2)))
    assert np.var(h[:, 0, 0].real) == pytest.approx(1 / eta, rel=0.03)
    assert np.var(h[:, 0, 1].real) == pytest.approx(1 / (2 * eta), rel=0.03)
    assert np.var(h[:, 0, 1].imag) == pytest.approx(1 / (2 * eta), rel=0.03)
    # density exp(-(eta/2) tr H^2) gives E tr H^2 = d^2 / eta
    tr2 = np.einsum("nij,nji->n", h, h).real
    assert tr2.mean() == pytest.approx(9 / eta, rel=0.02)


def test_sample_gue_object():
    b = sample_gue(4, 1.0, stream(1))
    assert b.dim == 4
    np.testing.assert_allclose(b.eigenvectors @ np.diag(b.eigenvalues) @ b.eigenvectors.conj().T,
                               b.matrix, atol=1e-12)
    with pytest.raises(ValueError):
        b.matrix[0, 0] = 1.0
    with pytest.raises(ValueError):
        sample_gue(3, 0.0, stream(1))


def test_propagator_is_matrix_exponential():
    from scipy.linalg import expm
    b = sample_gue(5, 1.0, stream(2))
    np.testing.assert_allclose(b.propagator(0.7), expm(-0.7j * b.matrix), atol=1e-12)


def test_diagonal_observable_sorted():
    a = HermitianObservable.diagonal([2.0, -1.0, 0.5])
    np.testing.assert_array_equal(a.eigenvalues, [-1.0, 0.5, 2.0])
    np.testing.assert_allclose(a.propagator(1.0), np.diag(np.exp(-1j * np.array([2.0, -1.0, 0.5]))))


def test_haar_unitary_and_invariance():
    u = haar_batch(stream(5), 20000, 3)
    eye = np.eye(3)
    np.testing.assert_allclose(u @ np.conj(np.swapaxes(u, 1, 2)), np.broadcast_to(eye, u.shape),
                               atol=1e-12)
    # E |U_ij|^2 = 1/d and E |U_ij|^4 = 2/(d(d+1))
    mag = np.abs(u[:, 0, 1]) ** 2
    assert mag.mean() == pytest.approx(1 / 3, abs=0.01)
    assert (mag ** 2).mean() == pytest.approx(2 / 12, abs=0.01)
    # |U_11|^2 is Beta(1, d-1) distributed
    assert stats.kstest(mag, stats.beta(1, 2).cdf).pvalue > 1e-3
    assert sample_haar_unitary(4, stream(5)).shape == (4, 4)


@pytest.mark.parametrize("measure", ["hs", "bures"])
def test_state_batch_is_density_matrix(measure):
    rho = state_batch(stream(9), 200, 4, measure)
    np.testing.assert_allclose(np.trace(rho, axis1=1, axis2=2), 1.0, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12
    p = purity_batch(rho)
    assert np.all((p >= 0.25 - 1e-12) & (p <= 1 + 1e-12))


def test_purity_means():
    # averages of the purity over each measure
    d = 3
    hs = purity_batch(state_batch(stream(11), 60000, d, "hs"))
    bu = purity_batch(state_batch(stream(12), 60000, d, "bures"))
    assert hs.mean() == pytest.approx(2 * d / (d * d + 1), abs=4 * hs.std() / math.sqrt(hs.size))
    assert bu.mean() == pytest.approx((5 * d * d + 1) / (2 * d * (d * d + 2)),
                                      abs=4 * bu.std() / math.sqrt(bu.size))


def test_pure_states():
    rho = pure_state_batch(stream(4), 50, 5)
    np.testing.assert_allclose(purity_batch(rho), 1.0, atol=1e-12)


def test_density_matrix_validation():
    rho = DensityMatrix.from_matrix(np.diag([2.0, 1.0, 1.0]))
    assert rho.purity == pytest.approx(6 / 16)
    assert rho.linear_entropy == pytest.approx(10 / 16)
    assert DensityMatrix.maximally_mixed(4).purity == pytest.approx(0.25)
    assert DensityMatrix.pure([1, 1j]).purity == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DensityMatrix.from_matrix(np.diag([1.0, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix.from_matrix(np.zeros((2, 2)))
    assert sample_state(3, "bures", stream(0)).dim == 3


def test_semicircle_helpers():
    r = semicircle_radius(50, 1.0)
    assert r == pytest.approx(2 * math.sqrt(50))
    x = np.linspace(-r, r, 2001)
    assert np.trapezoid(semicircle_pdf(x, r), x) == pytest.approx(1.0, abs=1e-4)
    assert semicircle_cdf(-r - 1, r) == 0.0
    assert semicircle_cdf(r + 1, r) == 1.0
    assert semicircle_cdf(0.0, r) == pytest.approx(0.5)


def test_spectral_ks_matches_scipy():
    d, eta = 50, 1.0
    r = semicircle_radius(d, eta)
    ev = np.linalg.eigvalsh(gue_batch(stream(1), 200, d, eta)).ravel()
    ref = stats.kstest(ev, lambda x: semicircle_cdf(x, r)).statistic
    assert spectral_ks(ev, r) == pytest.approx(ref, abs=1e-12)


@given(st.integers(2, 12), st.floats(0.1, 10.0))
@settings(max_examples=20, deadline=None)
def test_gue_scale_collapse(d, eta):
    # eta-scaled draw equals unit draw divided by sqrt(eta) on the same stream
    a = gue_batch(stream(0, d), 3, d, eta)
    b = gue_batch(stream(0, d), 3, d, 1.0)
    np.testing.assert_allclose(a, b / math.sqrt(eta), rtol=1e-14, atol=0)
