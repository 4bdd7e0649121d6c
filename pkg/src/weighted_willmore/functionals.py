"""Boundary functionals and theorem verdicts pairing them with volume limits."""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from .ambient import check_curvature_condition
from .comparison import cut_times
from .errors import ConfigurationError, DomainError, HypothesisViolation, NumericError
from .hypersurface import (Sphere, build_quadrature, coordinate_sphere, radial_graph,
                           weighted_area, weighted_enclosed_volume)
from .measures import ball_volume, sphere_area
from .volume import ratio_series

THEOREMS = ("thm12a", "thm12b", "thm13", "thm14", "prop25", "prop26", "thm61", "thm62")
NEEDS_M = ("thm13", "thm62", "prop25")
CRITICALITY_TOL = 1e-6
QUADRATURE_TOL = 1e-8


def _worst(values, grid, lowest=True):
    i = int(np.argmin(values) if lowest else np.argmax(values))
    return {"node": i, "x": [float(v) for v in grid.x[i]], "value": float(values[i])}


def _require_sign(values, grid, name, strict, tol=0.0):
    bad = values <= tol if strict else values < -tol
    if np.any(bad):
        w = _worst(values, grid)
        rel = ">" if strict else ">="
        raise HypothesisViolation(
            name, f"{name}: requires {rel} 0, node {w['node']} at {w['x']} has {w['value']:.6g}")


# ---------------------------------------------------------------------------
# functionals


def _real_power(base, p):
    base = np.asarray(base, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(base > 0, np.exp(p * np.log(np.where(base > 0, base, 1.0))), 0.0 if p > 0 else 1.0)


def willmore_f(grid, variant="a", k=0.0, tol=0.0):
    """``int (H_f/(n-1))^p e^{-f} dsigma`` with ``p = n-1`` (a) or ``n-1+4k`` (b)."""
    n = grid.n
    _require_sign(grid.H_f, grid, "H_f_nonneg", strict=False, tol=tol)
    if variant == "a":
        p = n - 1
    elif variant == "b":
        if k < 0:
            raise DomainError("k must be non-negative")
        p = n - 1 + 4 * k
    else:
        raise DomainError(f"unknown variant {variant!r}")
    base = np.maximum(grid.H_f, 0.0) / (n - 1)
    return grid.integrate(_real_power(base, p) * np.exp(-grid.f))


def willmore_m(grid, m):
    if m < grid.n:
        raise DomainError("m must be >= n")
    base = np.abs(grid.H_f) / (m - 1)
    return grid.integrate(_real_power(base, m - 1) * np.exp(-grid.f))


def shrinker_exponent(grid):
    """Per-node exponent ``(n-1)^2/(4H^2) + f - ((n-1)/H) d_nu f``."""
    n, H = grid.n, grid.H
    _require_sign(H, grid, "H_positive", strict=True)
    return (n - 1) ** 2 / (4 * H * H) + grid.f - (n - 1) / H * grid.dnu_f


def willmore_shrinker(grid):
    """Shrinker integrand against the unweighted area measure."""
    n = grid.n
    expo = shrinker_exponent(grid)
    return grid.integrate(np.exp(expo) * (grid.H / (n - 1)) ** (n - 1))


def heintze_karcher(grid, mode, enclosed, m=None):
    """``(int e^{-f}/H_f dsigma, RHS)`` with RHS ``m/(m-1)|M|_f`` or ``|M|_f``."""
    _require_sign(grid.H_f, grid, "H_f_positive", strict=True)
    lhs = grid.integrate(np.exp(-grid.f) / grid.H_f)
    if mode == "m":
        if m is None or m < grid.n:
            raise DomainError("mode m needs m >= n")
        return lhs, m / (m - 1) * enclosed
    if mode == "f":
        return lhs, float(enclosed)
    raise DomainError(f"unknown Heintze-Karcher mode {mode!r}")


def criticality_residual(grid, d, enclosed=None, tol=CRITICALITY_TOL):
    """``mean(H_f)/(d-1) - (1/d)|boundary|_f/|Omega|_f`` with a CMC screen."""
    if enclosed is None:
        enclosed = weighted_enclosed_volume(grid.hypersurface, grid.ambient,
                                            resolution=grid.resolution)
    if not enclosed > 0:
        raise DomainError("enclosed weighted volume must be positive")
    bd = weighted_area(grid)
    spread = float(np.max(grid.H_f) - np.min(grid.H_f))
    res = float(np.mean(grid.H_f) / (d - 1) - bd / (d * enclosed))
    return {"residual": res, "H_f_spread": spread, "boundary_volume": bd,
            "enclosed_volume": float(enclosed), "dimension": float(d),
            "cmc_candidate": spread <= 100 * tol}


def sphere_family_residual(ambient, rho, d=None, center=None, resolution=16):
    """Criticality residual of the sphere of radius ``rho`` (coordinate sphere in warped ambients)."""
    n = ambient.n
    d = n if d is None else d
    if ambient.model == "radial_warped":
        hyp = coordinate_sphere(rho)
    else:
        hyp = radial_graph(Sphere(np.zeros(n) if center is None else center, rho))
    grid = build_quadrature(hyp, ambient, resolution)
    return criticality_residual(grid, d)["residual"]


@dataclass
class RootResult:
    rho: float
    residual: float
    bracket: tuple
    bracket_residuals: tuple
    iterations: int


def criticality_root(ambient, bracket, d=None, center=None, resolution=16, xtol=1e-13):
    """Bisection for a critical radius in a one-parameter sphere family."""
    lo, hi = map(float, bracket)
    def fn(r):
        return sphere_family_residual(ambient, r, d, center, resolution)
    flo, fhi = fn(lo), fn(hi)
    if np.sign(flo) == np.sign(fhi):
        raise NumericError(
            f"no sign change of the criticality residual on [{lo}, {hi}]: "
            f"residual({lo}) = {flo:.6g}, residual({hi}) = {fhi:.6g}")
    rho, info = bisect(fn, lo, hi, xtol=xtol, full_output=True)
    return RootResult(float(rho), float(fn(rho)), (lo, hi), (flo, fhi), info.iterations)


# ---------------------------------------------------------------------------
# hypothesis checks


def _check(name, passed, value=None, detail=""):
    return {"name": name, "passed": bool(passed),
            "value": None if value is None else float(value), "detail": detail}


def _ray_radii(ray_max, count=24):
    return np.unique(np.concatenate([[0.0], np.geomspace(1e-2, ray_max, count - 1)]))


def _exterior_points(setup, radii):
    """Points on normal rays (clipped at cut/focal times) plus the nodes they start from."""
    grid = setup.grid
    n = setup.n
    if grid.hypersurface.kind == "coordinate_sphere":
        r0 = grid.hypersurface.radius
        rad = r0 + radii
        pts = rad[None, :, None] * grid.omega[:, None, :]
        keep = np.ones(pts.shape[:2], bool)
    else:
        shape = grid.hypersurface.shape
        tau = np.full(len(grid), np.inf)
        if not shape.is_convex():
            kap = grid.kappa
            with np.errstate(divide="ignore"):
                focal = np.where(kap < 0, -1.0 / kap, np.inf).min(axis=1)
            tau = np.minimum(cut_times(grid, float(radii[-1])), focal)
        pts = grid.x[:, None, :] + radii[None, :, None] * grid.normal[:, None, :]
        keep = radii[None, :] < tau[:, None]
        keep[:, 0] = True
    return pts, keep


def _interior_points(setup, fractions=(0.05, 0.25, 0.5, 0.75, 0.95)):
    grid = setup.grid
    s = np.asarray(fractions)
    if grid.hypersurface.kind == "coordinate_sphere":
        return (grid.hypersurface.radius * s[None, :, None] * grid.omega[:, None, :]).reshape(-1, setup.n)
    c = grid.hypersurface.shape.center
    return (c + s[None, :, None] * (grid.x - c)[:, None, :]).reshape(-1, setup.n)


def _curvature_check(setup, condition, points, region):
    rep = check_curvature_condition(setup.ambient, points, condition, tol=setup.hypothesis_tol,
                                    m=setup.m, grid_spec={"region": region, "n_points": len(points)})
    detail = f"min eigenvalue {rep.min_eigenvalue:.6g} at {rep.worst_point} ({region} samples)"
    if condition == "shrinker_half":
        detail = (f"max|Ric_f - g/2| = {rep.ricf_residual:.3e}, "
                  f"max|R + |grad f|^2 - f| = {rep.identity_residual:.3e}")
        value = max(rep.ricf_residual, rep.identity_residual)
        return _check(condition, rep.passed, value, detail)
    return _check(condition, rep.passed, rep.min_eigenvalue, detail)


def _ray_weight_checks(setup, pts, keep, radii, which):
    amb = setup.ambient
    grid = setup.grid
    n = setup.n
    out = []
    flat = pts[keep]
    if "drf" in which:
        if grid.hypersurface.kind == "coordinate_sphere":
            dirs = pts / np.linalg.norm(pts, axis=2, keepdims=True)
        else:
            dirs = np.broadcast_to(grid.normal[:, None, :], pts.shape)
        drf = np.sum(amb.grad_f(pts.reshape(-1, n)).reshape(pts.shape) * dirs, axis=2)[keep]
        worst = float(np.min(drf + setup.a))
        out.append(_check("drf_ge_minus_a", worst >= -setup.hypothesis_tol, worst,
                          f"min(d_r f + a) along rays with a = {setup.a}"))
    if "absf" in which:
        worst = float(setup.k - np.max(np.abs(amb.f(flat))))
        out.append(_check("abs_f_le_k", worst >= -setup.hypothesis_tol, worst,
                          f"k - max|f| along rays with k = {setup.k}"))
    return out


def _node_sign_check(name, values, grid, strict, tol):
    bad = values <= tol if strict else values < -tol
    w = _worst(values, grid)
    detail = f"min over nodes {w['value']:.6g} at node {w['node']} {w['x']}"
    return _check(name, not np.any(bad), w["value"], detail)


def hypothesis_checks(setup, theorem):
    """Run every hypothesis of ``theorem`` on ``setup``; returns a list of check dicts."""
    if theorem not in THEOREMS:
        raise ConfigurationError(f"unknown theorem {theorem!r}")
    grid = setup.grid
    tol = setup.hypothesis_tol
    checks = []
    if theorem in NEEDS_M and setup.m is None:
        raise ConfigurationError(f"{theorem} needs a synthetic dimension m")
    radii = _ray_radii(setup.ray_max)
    pts, keep = _exterior_points(setup, radii)
    ext = pts[keep]
    inner = _interior_points(setup)
    if theorem in ("thm12a", "thm12b", "thm61"):
        checks.append(_node_sign_check("H_f_nonneg", grid.H_f, grid, False, tol))
        checks.append(_curvature_check(setup, "Ricf_nonneg", np.vstack([ext, inner]), "exterior+interior"))
        checks += _ray_weight_checks(setup, pts, keep, radii,
                                     ("absf",) if theorem == "thm12b" else ("drf",))
    elif theorem in ("thm13", "thm62"):
        checks.append(_curvature_check(setup, "Ricfm_nonneg", np.vstack([ext, inner]), "exterior+interior"))
    elif theorem == "thm14":
        checks.append(_curvature_check(setup, "shrinker_half", np.vstack([ext, inner]), "exterior+interior"))
        checks.append(_node_sign_check("H_positive", grid.H, grid, True, 0.0))
    elif theorem == "prop25":
        checks.append(_curvature_check(setup, "Ricfm_nonneg", np.vstack([inner, grid.x]), "interior"))
        checks.append(_node_sign_check("H_f_positive", grid.H_f, grid, True, 0.0))
    elif theorem == "prop26":
        checks.append(_curvature_check(setup, "Ricf_nonneg", np.vstack([inner, grid.x]), "interior"))
        checks.append(_node_sign_check("H_f_positive", grid.H_f, grid, True, 0.0))
    if theorem in ("thm61", "thm62"):
        d = setup.n if theorem == "thm61" else setup.m
        crit = criticality_residual(grid, d, setup.enclosed_volume)
        ok = crit["cmc_candidate"] and abs(crit["residual"]) <= CRITICALITY_TOL
        detail = (f"residual {crit['residual']:.3e} (|.| <= {CRITICALITY_TOL:g}), "
                  f"H_f spread {crit['H_f_spread']:.3e}")
        if not crit["cmc_candidate"]:
            detail += "; not a CMC candidate"
        checks.append(_check("criticality", ok, crit["residual"], detail))
    return checks


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class FunctionalReport:
    theorem: str
    lhs: Optional[float]
    rhs: Optional[float]
    slack: Optional[float]
    tolerance: Optional[float]
    verdict: str
    hypothesis_checks: list
    grids: dict
    r0: Optional[float] = None
    failed_check: Optional[str] = None
    volume_series: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        out = {k: v for k, v in self.__dict__.items()}
        if self.r0 is None:
            out.pop("r0")
        return out


def classify(lhs, rhs, rhs_error, eq_tol):
    tol = eq_tol * max(abs(lhs), abs(rhs))
    slack = lhs - rhs
    if slack < -(tol + rhs_error):
        return "violated", slack, tol
    if abs(slack) <= tol + rhs_error:
        return "equality", slack, tol
    return "holds", slack, tol


def _series(setup, kind):
    center = setup.avr_center
    if kind in ("AVR", "AVR_f_m") and center is None:
        center = [0.0] * setup.n
    return ratio_series(kind, setup.schedule, grid=setup.grid, ambient=setup.ambient,
                        center=center, a=setup.a, k=setup.k, m=setup.m, threads=setup.threads)


def verify(setup, theorem):
    """Check hypotheses, then pair the theorem's boundary functional with its volume side."""
    grid = setup.grid
    n = setup.n
    grids = {"boundary_resolution": setup.resolution, "nodes": len(grid),
             "schedule": [float(r) for r in setup.schedule]}
    checks = hypothesis_checks(setup, theorem)
    failed = [c for c in checks if not c["passed"]]
    if failed:
        return FunctionalReport(theorem, None, None, None, None, "hypotheses-unmet", checks, grids,
                                failed_check=failed[0]["name"],
                                diagnostics={"failed_detail": failed[0]["detail"]})
    diag = {}
    series = None
    r0 = None
    m = setup.m
    bd = setup.boundary_volume
    om = setup.enclosed_volume
    if theorem == "thm12a":
        lhs = willmore_f(grid, "a")
        series = _series(setup, "RV_f")
        rhs, err = series.limit * sphere_area(n - 1), series.error * sphere_area(n - 1)
    elif theorem == "thm12b":
        lhs = willmore_f(grid, "b", setup.k)
        series = _series(setup, "RVbar_f")
        s = sphere_area(n - 1 + 4 * setup.k)
        rhs, err = series.limit * s, series.error * s
    elif theorem == "thm13":
        lhs = willmore_m(grid, m)
        series = _series(setup, "AVR_f_m")
        rhs, err = series.limit * sphere_area(m - 1), series.error * sphere_area(m - 1)
        diag["untestable"] = "one-end hypothesis of the rigidity statement has no numerical analogue"
    elif theorem == "thm14":
        lhs = willmore_shrinker(grid)
        expo = shrinker_exponent(grid)
        diag["max_abs_exponent"] = float(np.max(np.abs(expo)))
        series = _series(setup, "AVR")
        rhs, err = series.limit * sphere_area(n - 1), series.error * sphere_area(n - 1)
    elif theorem in ("prop25", "prop26"):
        lhs, rhs = heintze_karcher(grid, "m" if theorem == "prop25" else "f", om, m)
        err = 0.0
    elif theorem == "thm61":
        lhs = bd
        series = _series(setup, "RV_f")
        L = max(series.limit, 0.0)
        rhs = n * ball_volume(n) ** (1 / n) * L ** (1 / n) * om ** ((n - 1) / n)
        err = (n * ball_volume(n) ** (1 / n) * om ** ((n - 1) / n)
               * abs((L + series.error) ** (1 / n) - L ** (1 / n)))
    else:  # thm62
        lhs = bd
        series = _series(setup, "AVR_f_m")
        L = max(series.limit, 0.0)
        rhs = m * ball_volume(m) ** (1 / m) * L ** (1 / m) * om ** ((m - 1) / m)
        err = (m * ball_volume(m) ** (1 / m) * om ** ((m - 1) / m)
               * abs((L + series.error) ** (1 / m) - L ** (1 / m)))
    verdict, slack, tol = classify(lhs, rhs, err, setup.eq_tol)
    if series is not None:
        diag["limit"] = series.limit
        diag["limit_error"] = series.error
        diag["series_verdict"] = series.verdict
    diag["rhs_error"] = float(err)
    diag["boundary_volume"] = bd
    diag["enclosed_volume"] = om
    if verdict == "equality" and series is not None and series.limit > 0:
        if theorem in ("thm12a", "thm12b", "thm61"):
            r0 = (bd / (series.limit * sphere_area(n - 1))) ** (1 / (n - 1))
        elif theorem in ("thm13", "thm62"):
            r0 = (bd / (series.limit * sphere_area(m - 1))) ** (1 / (m - 1))
    return FunctionalReport(theorem, float(lhs), float(rhs), float(slack), float(tol), verdict,
                            checks, grids, r0=None if r0 is None else float(r0),
                            volume_series=None if series is None else series.as_dict(),
                            diagnostics=diag)
