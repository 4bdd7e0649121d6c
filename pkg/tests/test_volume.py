import math

import numpy as np
import pytest
from scipy.special import erf

from weighted_willmore.ambient import PROFILES, flat_ambient, gaussian_weight, warped_ambient
from weighted_willmore.errors import DomainError
from weighted_willmore.hypersurface import (Ellipsoid, Sphere, build_quadrature, coordinate_sphere,
                                            radial_graph)
from weighted_willmore.measures import ball_volume, sphere_area
from weighted_willmore.volume import (TubeIntegrator, ball_volume_f, default_schedule,
                                      mc_cross_check, normalizer, ratio_series, richardson,
                                      tube_volume_f)

# Steiner formula for the (2, 1, 1) ellipsoid: |E| + A R + M R^2 + 4 pi R^3 / 3 with
# M = int H / 2; oracle frozen from independent adaptive quadrature.
STEINER_ELLIPSOID_R05 = 23.976338200785474
GAUSSIAN_TOTAL_MASS_3D = (4 * np.pi) ** 1.5


def gaussian_ball_mass(rho):
    """Closed-form mass of the origin ball under e^{-|x|^2/4} in R^3."""
    return 4 * np.pi * (2 * np.sqrt(np.pi) * erf(rho / 2) - 2 * rho * np.exp(-rho ** 2 / 4))


def unit_sphere_grid(n=3, weight=None, rho=1.0, res=12):
    return build_quadrature(radial_graph(Sphere(np.zeros(n), rho)), flat_ambient(n, weight), res)


def test_default_schedules():
    assert np.allclose(default_schedule(), 10 * 2.0 ** np.arange(7))
    g = default_schedule(gaussian=True)
    assert g[-1] == 60.0
    assert np.allclose(g[1:] / g[:-1], 2.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_normalizer_exp_reduces_to_ball(n):
    assert normalizer("exp", 2.0, n) == pytest.approx(ball_volume(n) * 2.0 ** n, rel=1e-14)


def test_normalizer_exp_closed_form():
    a, r = 0.5, 3.0
    exact = 3 * ball_volume(3) * (np.exp(a * r) * (r ** 2 / a - 2 * r / a ** 2 + 2 / a ** 3)
                                  - 2 / a ** 3)
    assert normalizer("exp", r, 3, a=a) == pytest.approx(exact, rel=1e-12)


def test_normalizer_other_kinds():
    assert normalizer("n4k", 2.0, 3, k=0.5) == pytest.approx(ball_volume(5) * 32, rel=1e-14)
    assert normalizer("m", 2.0, 3, m=4.5) == pytest.approx(ball_volume(4.5) * 2 ** 4.5, rel=1e-14)
    with pytest.raises(DomainError):
        normalizer("m", 2.0, 3, m=2.0)
    with pytest.raises(DomainError):
        normalizer("exp", 1000.0, 3, a=1.0)


@pytest.mark.parametrize("n,R", [(2, 0.5), (3, 1.0), (3, 7.0), (4, 2.0)])
def test_flat_ball_tube_is_bigger_ball(n, R):
    grid = unit_sphere_grid(n)
    assert tube_volume_f(grid, R) == pytest.approx(ball_volume(n) * (1 + R) ** n, rel=1e-13)


def test_ellipsoid_tube_matches_steiner():
    grid = build_quadrature(radial_graph(Ellipsoid(np.zeros(3), [2, 1, 1])), flat_ambient(3), 48)
    assert tube_volume_f(grid, 0.5) == pytest.approx(STEINER_ELLIPSOID_R05, rel=1e-10)


def test_gaussian_tube_tends_to_total_mass():
    grid = unit_sphere_grid(3, gaussian_weight(), res=16)
    assert tube_volume_f(grid, 2.0) == pytest.approx(gaussian_ball_mass(3.0), rel=1e-10)
    assert abs(tube_volume_f(grid, 8.0) - GAUSSIAN_TOTAL_MASS_3D) < 1e-5


def test_shell_excludes_body():
    integ = TubeIntegrator(unit_sphere_grid(3), r_max=4.0)
    assert integ.shell(2.0) == pytest.approx(ball_volume(3) * (3.0 ** 3 - 1), rel=1e-13)


def test_ball_volume_f():
    amb = flat_ambient(3, gaussian_weight())
    assert ball_volume_f(amb, None, 1.0) == pytest.approx(3.6131137861341283, rel=1e-12)
    assert ball_volume_f(amb, None, 9.0) == pytest.approx(44.54662360280105, rel=1e-12)
    assert ball_volume_f(amb, None, 2.0, weighted=False) == pytest.approx(32 * np.pi / 3)
    cone = warped_ambient(3, PROFILES["cone"](alpha=0.8))
    assert ball_volume_f(cone, None, 2.0) == pytest.approx(0.64 * 32 * np.pi / 3, rel=1e-13)


def test_richardson_is_exact_on_model():
    R = 10 * 2.0 ** np.arange(7)
    L, err, fits = richardson(R, 3.0 + 5.0 / R)
    assert L == pytest.approx(3.0, rel=1e-14)
    assert err < 1e-13
    assert len(fits) == 2
    with pytest.raises(DomainError):
        richardson(R[:2], R[:2])


def test_flat_ball_rv_limit_is_one():
    series = ratio_series("RV_f", default_schedule(), grid=unit_sphere_grid(3))
    assert series.verdict == "converged"
    assert abs(series.limit - 1.0) < 1e-3
    assert series.monotone_nonincreasing


def test_cone_rv_limit_is_alpha_squared():
    amb = warped_ambient(3, PROFILES["cone"](alpha=0.8))
    grid = build_quadrature(coordinate_sphere(1.0), amb, 8)
    series = ratio_series("RV_f", default_schedule(), grid=grid)
    assert series.limit == pytest.approx(0.64, abs=1e-3)


def test_gaussian_avr_is_one():
    amb = flat_ambient(3, gaussian_weight())
    series = ratio_series("AVR", default_schedule(gaussian=True), ambient=amb, center=np.zeros(3))
    assert series.limit == pytest.approx(1.0, abs=1e-12)


def test_ratio_series_rejects_bad_schedules():
    grid = unit_sphere_grid(3)
    with pytest.raises(DomainError):
        ratio_series("RV_f", [1, 2, 4, 8, 16], grid=grid)
    with pytest.raises(DomainError):
        ratio_series("RV_f", [1, 2, 4, 8, 16, 33], grid=grid)
    with pytest.raises(DomainError):
        ratio_series("bogus", default_schedule(), grid=grid)


def test_mc_agrees_with_quadrature_and_ignores_threads():
    grid = build_quadrature(radial_graph(Ellipsoid(np.zeros(3), [2, 1, 1])), flat_ambient(3), 24)
    one = mc_cross_check(grid, 0.5, samples=200_000, seed=7, threads=1)
    four = mc_cross_check(grid, 0.5, samples=200_000, seed=7, threads=4)
    assert one["estimate"] == four["estimate"]
    z = (one["estimate"] - STEINER_ELLIPSOID_R05) / one["stderr"]
    assert abs(z) < 4
    assert math.isfinite(one["stderr"]) and one["stderr"] > 0
    assert sphere_area(2) == pytest.approx(4 * np.pi)
