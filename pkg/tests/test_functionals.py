import numpy as np
import pytest

from weighted_willmore.ambient import PROFILES, flat_ambient, gaussian_weight, warped_ambient
from weighted_willmore.errors import ConfigurationError, HypothesisViolation, NumericError
from weighted_willmore.functionals import (classify, criticality_residual, criticality_root,
                                           heintze_karcher, hypothesis_checks, shrinker_exponent,
                                           sphere_family_residual, verify, willmore_f, willmore_m,
                                           willmore_shrinker)
from weighted_willmore.hypersurface import Ellipsoid, Sphere, build_quadrature, radial_graph
from weighted_willmore.measures import ball_volume, sphere_area
from weighted_willmore.setup import ProblemSetup

from conftest import scene_setup


def sphere_grid(n=3, rho=1.0, weight=None, center=None, res=12):
    c = np.zeros(n) if center is None else np.asarray(center, float)
    return build_quadrature(radial_graph(Sphere(c, rho)), flat_ambient(n, weight), res)


@pytest.mark.parametrize("n,rho", [(2, 1.0), (3, 1.0), (3, 2.0), (4, 0.5)])
def test_willmore_of_round_spheres_is_scale_free(n, rho):
    assert willmore_f(sphere_grid(n, rho)) == pytest.approx(sphere_area(n - 1), rel=1e-12)


def test_willmore_variant_b_and_m():
    grid = sphere_grid(3, 2.0)
    # (H/(n-1))^{n-1+4k} |S| rho^{n-1} with H/(n-1) = 1/2
    assert willmore_f(grid, "b", k=0.25) == pytest.approx(4 * np.pi * 4 * 0.5 ** 3, rel=1e-12)
    # (H/(m-1))^{m-1} with H = 1, m = 4
    assert willmore_m(grid, 4.0) == pytest.approx(16 * np.pi / 27, rel=1e-12)


def test_willmore_refuses_negative_weighted_curvature():
    grid = sphere_grid(3, 3.0, gaussian_weight())
    with pytest.raises(HypothesisViolation) as exc:
        willmore_f(grid)
    assert exc.value.check == "H_f_nonneg"


@pytest.mark.parametrize("n,rho", [(2, 1.0), (2, 2.0), (3, 1.0), (3, 2.0)])
def test_shrinker_exponent_vanishes_on_gaussian_spheres(n, rho):
    grid = sphere_grid(n, rho, gaussian_weight())
    assert np.max(np.abs(shrinker_exponent(grid))) < 1e-10
    assert willmore_shrinker(grid) == pytest.approx(sphere_area(n - 1), rel=1e-8)


def test_heintze_karcher_ball_and_ellipsoid():
    grid = sphere_grid(3, 1.5)
    lhs, rhs = heintze_karcher(grid, "m", ball_volume(3) * 1.5 ** 3, m=3)
    assert lhs == pytest.approx(4 * np.pi * 1.5 ** 3 / 2, rel=1e-12)
    assert rhs == pytest.approx(lhs, rel=1e-12)
    egrid = build_quadrature(radial_graph(Ellipsoid(np.zeros(3), [2, 1, 1])), flat_ambient(3), 48)
    lhs, rhs = heintze_karcher(egrid, "m", 8 * np.pi / 3, m=3)
    assert lhs == pytest.approx(14.240139427007193, rel=1e-12)
    assert lhs > rhs


def test_classify_rule():
    assert classify(1.0, 1.0 + 1e-4, 0.0, 1e-3)[0] == "equality"
    assert classify(2.0, 1.0, 0.0, 1e-3)[0] == "holds"
    assert classify(1.0, 2.0, 0.0, 1e-3)[0] == "violated"
    assert classify(1.0, 1.1, 0.2, 1e-3)[0] == "equality"


def test_flat_ball_is_critical():
    res = criticality_residual(sphere_grid(3, 1.3), 3)
    assert abs(res["residual"]) < 1e-8
    assert res["cmc_candidate"]


def test_ellipsoid_is_not_cmc():
    grid = build_quadrature(radial_graph(Ellipsoid(np.zeros(3), [2, 1, 1])), flat_ambient(3), 16)
    assert not criticality_residual(grid, 3)["cmc_candidate"]


def test_gaussian_spheres_have_no_critical_radius_on_bracket():
    amb = flat_ambient(3, gaussian_weight())
    vals = [sphere_family_residual(amb, r) for r in (0.5, 1.0, 2.0)]
    assert all(v < 0 for v in vals)
    with pytest.raises(NumericError, match="no sign change"):
        criticality_root(amb, (0.5, 2.0))


@pytest.mark.parametrize("rho", [0.3, 1.0, 1.7])
def test_cone_coordinate_spheres_are_critical(rho):
    amb = warped_ambient(3, PROFILES["cone"](alpha=0.8))
    assert abs(sphere_family_residual(amb, rho)) < 1e-8


def test_hypothesis_checks_names():
    setup = scene_setup("flat-unit-ball")
    names = [c["name"] for c in hypothesis_checks(setup, "thm12a")]
    assert names[:2] == ["H_f_nonneg", "Ricf_nonneg"]
    with pytest.raises(ConfigurationError):
        hypothesis_checks(setup, "thm99")


def test_verify_reports_failed_check_instead_of_verdict():
    report = verify(scene_setup("nonconvex-lobe"), "thm12a")
    assert report.verdict == "hypotheses-unmet"
    assert report.failed_check == "H_f_nonneg"
    assert report.lhs is None and report.rhs is None


def test_verify_needs_m():
    setup = ProblemSetup(flat_ambient(3), radial_graph(Sphere(np.zeros(3), 1.0)), resolution=8)
    with pytest.raises(ConfigurationError):
        verify(setup, "thm13")


def test_verify_ellipsoid_prop26_holds():
    report = verify(scene_setup("ellipsoid-211"), "prop26")
    assert report.verdict == "holds"
    assert report.slack > 0
