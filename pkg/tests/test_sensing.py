import numpy as np
import pytest

from nomaisac import conic
from nomaisac.scenario import make_angle_grid
from nomaisac.sensing import (
    beampattern, beampattern_value, matching_loss, reference_objective, solve_reference_covariance,
)


def test_beampattern_of_identity_is_flat():
    g = make_angle_grid(6)
    p = beampattern(np.eye(6) / 6, g.steering)
    assert np.allclose(p, 1.0)


def test_beampattern_shape_and_psd_checks():
    g = make_angle_grid(3)
    with pytest.raises(ValueError):
        beampattern(np.eye(4), g.steering)
    with pytest.raises(ValueError):
        beampattern(-np.eye(3), g.steering)


def test_single_beam_peaks_at_its_angle():
    g = make_angle_grid(8)
    a = g.steering[70]
    p = beampattern(np.outer(a, a.conj()), g.steering)
    assert np.argmax(p) == 70
    assert beampattern_value(np.outer(a, a.conj()), a) == pytest.approx(64.0)


def test_reference_spec_properties(spec4):
    R = spec4.reference_cov
    assert np.trace(R).real == pytest.approx(spec4.pt, rel=1e-7)
    assert np.linalg.eigvalsh(R)[0] > -1e-9 * spec4.pt
    assert matching_loss(R, spec4) == pytest.approx(0.0, abs=1e-20)
    # the stored pattern is the optimum of the sensing-only least squares
    best = reference_objective(R, spec4.delta_star, spec4)
    for d in (0.9, 1.1):
        assert reference_objective(R, d * spec4.delta_star, spec4) >= best


def test_reference_loss_beats_uniform_covariance(spec4):
    n = spec4.n_antennas
    flat = spec4.pt * np.eye(n) / n
    d = spec4.delta_star
    assert reference_objective(spec4.reference_cov, d, spec4) < reference_objective(flat, d, spec4)


def test_reference_scales_linearly_with_power():
    g = make_angle_grid(4)
    phi = (np.abs(g.angles_deg) <= 20).astype(float)
    R1, d1, l1 = solve_reference_covariance(g, phi, 1.0)
    R2, d2, l2 = solve_reference_covariance(g, phi, 0.1)
    assert np.allclose(0.1 * R1, R2, atol=1e-7)
    assert d2 == pytest.approx(0.1 * d1, rel=1e-6)
    assert l2 == pytest.approx(0.01 * l1, rel=1e-4)


def test_coefficient_rows_reproduce_pattern(spec4):
    p = spec4.coeffs @ conic.matrix_to_params(spec4.reference_cov)
    assert np.allclose(p, spec4.reference_pattern, atol=1e-12)
