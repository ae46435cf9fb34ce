import numpy as np
import pytest

from photoshadow.haar import RngSeed, sample_haar
from photoshadow.matcore import basis_projector, purity, spectral_decompose, validate_unitary
from photoshadow.noise import (NoiseModel, apply_depolarizing, clamp_probabilities, coherent_error,
                               distorted_state, noisy_probabilities, sample_coherent_distortion)

from conftest import random_pure_state


def test_depolarizing_limits():
    rho = basis_projector(4)
    np.testing.assert_array_equal(apply_depolarizing(rho, 0), rho)
    np.testing.assert_allclose(apply_depolarizing(rho, 1), np.eye(4) / 4)
    lead = spectral_decompose(apply_depolarizing(basis_projector(8), 0.10413)).leading
    assert lead == pytest.approx(0.90889, abs=1e-5)


def test_distorted_spectrum_and_purity(gen):
    uc = sample_haar(4, gen)
    rho = random_pure_state(gen, 4)
    out = distorted_state(rho, NoiseModel(0.1, uc))
    np.testing.assert_allclose(spectral_decompose(out).eigenvalues, [0.925, 0.025, 0.025, 0.025], atol=1e-12)
    p, d = 0.1, 4
    assert purity(out) == pytest.approx((1 - p) ** 2 + 2 * p * (1 - p) / d + p**2 / d, abs=1e-12)
    np.testing.assert_allclose(distorted_state(rho, NoiseModel(0, np.eye(4))), rho, atol=1e-15)


def test_noisy_probabilities(gen):
    e1 = basis_projector(8)
    np.testing.assert_allclose(noisy_probabilities(e1, np.eye(8), NoiseModel(0, np.eye(8))), np.eye(8)[0])
    u = sample_haar(8, gen)
    np.testing.assert_allclose(noisy_probabilities(e1, u, NoiseModel(1, sample_haar(8, 1))), np.full(8, 1 / 8))
    stack = np.stack([sample_haar(8, k) for k in range(10)])
    probs = noisy_probabilities(random_pure_state(gen, 8), stack, NoiseModel(0.2, u))
    np.testing.assert_allclose(probs.sum(axis=1), 1, atol=1e-14)


def test_clamp():
    np.testing.assert_allclose(clamp_probabilities(np.array([1.0, -1e-12])), [1.0, 0.0])
    with pytest.raises(ValueError):
        clamp_probabilities(np.array([1.1, -0.1]))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(1.5, np.eye(2))
    with pytest.raises(ValueError):
        NoiseModel(0.1, np.diag([1, 2]))
    with pytest.raises(ValueError):
        NoiseModel(0.1, np.eye(2), epsilon=0.3)


def test_coherent_distortion():
    assert np.array_equal(sample_coherent_distortion(8, 0.0, 1).u_c, np.eye(8))
    for seed in range(5):
        nm = sample_coherent_distortion(8, 0.012, RngSeed(seed))
        assert validate_unitary(nm.u_c)
        assert nm.epsilon == pytest.approx(0.012, rel=1e-9)
        assert coherent_error(basis_projector(8), nm.u_c) == pytest.approx(7 * 0.012**2, rel=1e-9)
    with pytest.raises(ValueError):
        sample_coherent_distortion(8, 0.5, 1)


def test_coherent_error_trivial():
    e1 = basis_projector(5)
    assert coherent_error(e1, np.eye(5)) == 0
    assert coherent_error(e1, np.diag([np.exp(0.3j), 1, 1, 1, 1])) == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        coherent_error(np.eye(5) / 5, np.eye(5))
