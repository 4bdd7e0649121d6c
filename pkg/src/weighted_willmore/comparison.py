"""Normal-ray flows and the mean-curvature comparison quantities.

Normalisation used throughout: the relative area element satisfies
``A(0) = 1`` on every ray and ``A_f(r) = exp(-f(gamma(r))) A(r)``, hence
``A_f(0) = exp(-f(p))`` and ``theta_f(0) = exp(-f(p))``.
"""
import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .ambient import bakry_emery_at, check_curvature_condition
from .errors import DomainError, HypothesisViolation, NumericError, UnsupportedError

NORMALIZATION = "A(0)=1; A_f(r)=exp(-f(gamma(r)))*A(r); theta_f(0)=exp(-f(p))"
FOCAL_EPS = 1e-12
CUT_EPS = 1e-9


@dataclass
class ComparisonCurve:
    node: int
    n: int
    direction: int
    r: np.ndarray
    A: np.ndarray
    A_f: np.ndarray
    delta_r: np.ndarray
    delta_f_r: np.ndarray
    dr_f: np.ndarray
    f_ray: np.ndarray
    points: np.ndarray
    past_focal: np.ndarray
    past_cut: np.ndarray
    H: float
    H_f: float
    f0: float
    dnu_f: float
    kappa: np.ndarray
    focal_time: float = math.inf
    cut_time: float = math.inf
    ode_rel_dev: Optional[float] = None
    ambient: object = field(default=None, repr=False)
    normalization: str = NORMALIZATION

    @property
    def valid(self):
        """Samples before the focal and cut times."""
        return ~(self.past_focal | self.past_cut)


# ---------------------------------------------------------------------------
# flows


def _ray_frame(grid, direction):
    if direction not in (1, -1):
        raise DomainError("direction must be +1 (outward) or -1 (inward)")
    nu = direction * grid.normal
    kappa = direction * grid.kappa
    H = direction * grid.H
    H_f = H - direction * grid.dnu_f
    return nu, kappa, H, H_f


def _ray_points(grid, nodes, r, direction):
    """Ambient points along the rays (pseudo-Cartesian chart for warped)."""
    if grid.hypersurface.kind == "coordinate_sphere":
        rad = np.maximum(grid.hypersurface.radius + direction * r,
                         1e-12 * grid.hypersurface.radius)
        return rad[None, :, None] * grid.omega[nodes][:, None, :]
    nu = direction * grid.normal[nodes]
    return grid.x[nodes][:, None, :] + r[None, :, None] * nu[:, None, :]


def _jacobi_integrate(kappa, curvature, r_eval, rtol):
    """Integrate ``J'' = -K(r) J, J(0) = 1, J'(0) = kappa`` for every column of
    ``kappa`` in the variable ``s = log(1 + r)`` so that a constant step bound
    means a step ``~ 0.01 (1 + r)`` in ``r``.  Returns ``(J, dJ)`` at ``r_eval``."""
    shape = kappa.shape
    k = kappa.ravel()
    M = len(k)
    y0 = np.concatenate([np.ones(M), k])
    s_eval = np.log1p(r_eval)

    def rhs(s, y):
        r = math.expm1(s)
        J, dJ = y[:M], y[M:]
        return np.concatenate([(1.0 + r) * dJ, -(1.0 + r) * curvature(r) * J])

    sol = solve_ivp(rhs, (0.0, s_eval[-1]), y0, method="DOP853", t_eval=s_eval,
                    rtol=rtol, atol=rtol * 1e-4, max_step=0.01)
    if not sol.success:
        raise NumericError(f"Jacobi integration failed: {sol.message}",
                           last_good=float(np.expm1(sol.t[-1])) if len(sol.t) else 0.0)
    S = len(r_eval)
    J = sol.y[:M].T.reshape(S, *shape).swapaxes(0, 1)
    dJ = sol.y[M:].T.reshape(S, *shape).swapaxes(0, 1)
    return J, dJ


def flow_rays(grid, r_samples, nodes=None, direction=1, rtol=1e-10, cross_check=True):
    """Flow the normal exponential map from several boundary nodes.

    Flat ambients use the exact solution ``A = prod(1 + kappa_i r)`` with the
    Jacobi ODE as cross-check; warped ambients integrate the Jacobi system and
    use the closed form ``(h(r0 + r)/h(r0))^(n-1)`` as cross-check.
    """
    ambient = grid.ambient
    n = grid.n
    r = np.asarray(r_samples, dtype=float)
    if r.ndim != 1 or r[0] < 0 or np.any(np.diff(r) <= 0):
        raise DomainError("ray samples must be increasing and start at r >= 0")
    nodes = np.arange(len(grid)) if nodes is None else np.atleast_1d(nodes)
    nu, kappa, H, H_f = _ray_frame(grid, direction)
    kap = kappa[nodes]                                     # (N, n-1)
    warped = grid.hypersurface.kind == "coordinate_sphere"
    N = len(nodes)
    if warped:
        r0 = grid.hypersurface.radius
        prof = ambient.profile
        rad = r0 + direction * r
        with np.errstate(invalid="ignore", divide="ignore"):
            exact_J = np.where(rad[None, :, None] > 0,
                               prof.h(np.maximum(rad, 0.0))[None, :, None] / prof.h(r0), 0.0)
        focal_time = r0 if direction < 0 else math.inf

        def curvature(s):
            return float(ambient.radial_sectional_curvature(r0 + direction * s))

        reach = r < focal_time - 1e-9
        J = np.zeros((N, len(r), n - 1))
        dJ = np.zeros_like(J)
        if np.any(reach):
            Jr, dJr = _jacobi_integrate(kap, curvature, r[reach], rtol)
            J[:, reach], dJ[:, reach] = Jr, dJr
        focal = ~reach[None, :] | np.any(J <= FOCAL_EPS, axis=2)
        A_main = np.where(focal, 0.0, np.prod(np.where(focal[..., None], 1.0, J), axis=2))
        A_check = np.broadcast_to(exact_J[:, :, 0] ** (n - 1), A_main.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta_r = np.where(focal, np.nan, np.sum(dJ / J, axis=2))
        focal_times = np.full(N, focal_time)
    else:
        lin = 1.0 + kap[:, None, :] * r[None, :, None]        # (N, S, n-1)
        focal = np.any(lin <= FOCAL_EPS, axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ft = np.where(kap < 0, -1.0 / kap, np.inf).min(axis=1)
        focal |= r[None, :] >= ft[:, None]
        A_main = np.where(focal, 0.0, np.prod(lin, axis=2))
        with np.errstate(divide="ignore", invalid="ignore"):
            delta_r = np.where(focal, np.nan, np.sum(kap[:, None, :] / lin, axis=2))
        focal_times = ft
        A_check = None
        if cross_check:
            reach = r < np.min(ft) - 1e-9 if np.isfinite(np.min(ft)) else np.ones(len(r), bool)
            if np.any(reach):
                J, _ = _jacobi_integrate(kap, lambda s: 0.0, r[reach], rtol)
                A_check = np.full_like(A_main, np.nan)
                A_check[:, reach] = np.prod(J, axis=2)
    pts = _ray_points(grid, nodes, r, direction)
    fr = ambient.f(pts.reshape(-1, n)).reshape(N, len(r))
    raydir = (pts / np.linalg.norm(pts, axis=2, keepdims=True) * direction if warped
              else np.broadcast_to(nu[nodes][:, None, :], pts.shape))
    drf = np.sum(ambient.grad_f(pts.reshape(-1, n)).reshape(pts.shape) * raydir, axis=2)
    A_f = np.exp(-fr) * A_main
    dev = None
    if cross_check and A_check is not None:
        ok = ~focal & np.isfinite(A_check)
        if np.any(ok):
            dev = float(np.max(np.abs(A_main[ok] - A_check[ok]) / np.abs(A_check[ok])))
    curves = []
    for i, node in enumerate(nodes):
        curves.append(ComparisonCurve(
            node=int(node), n=n, direction=direction, r=r, A=A_main[i], A_f=A_f[i],
            delta_r=delta_r[i], delta_f_r=delta_r[i] - drf[i], dr_f=drf[i], f_ray=fr[i],
            points=pts[i], past_focal=np.maximum.accumulate(focal[i]),
            past_cut=np.zeros(len(r), bool), H=float(H[node]), H_f=float(H_f[node]),
            f0=float(grid.f[node]), dnu_f=float(direction * grid.dnu_f[node]),
            kappa=kap[i].copy(), focal_time=float(focal_times[i]), ode_rel_dev=dev,
            ambient=ambient))
    return curves


def flow_normal_ray(grid, node, r_samples, direction=1, rtol=1e-10, cross_check=True):
    return flow_rays(grid, r_samples, [node], direction, rtol, cross_check)[0]


def default_ray_samples(r_max=100.0, count=200):
    """Samples dense near the boundary and geometric further out."""
    inner = np.linspace(0.0, 1.0, 41)
    outer = np.geomspace(1.0, r_max, count - 40)[1:] if r_max > 1 else np.array([])
    return np.unique(np.concatenate([inner[inner <= r_max], outer]))


# ---------------------------------------------------------------------------
# cut locus


def _distance_along(grid, pts, direction):
    shape = grid.hypersurface.shape
    d = shape.distance_to_boundary(pts)
    if direction > 0:
        d = np.where(shape.contains(pts), 0.0, d)
    return d


def cut_clip(grid, curve, eps=CUT_EPS):
    """Flag samples where the ray no longer realises the distance to the body."""
    if grid.ambient.model == "radial_warped" and grid.hypersurface.kind == "coordinate_sphere":
        return replace(curve, past_cut=np.zeros(len(curve.r), bool))
    if grid.ambient.model != "flat":
        raise UnsupportedError("cut detection needs a flat ambient")
    d = _distance_along(grid, curve.points, curve.direction)
    flags = np.maximum.accumulate(d < curve.r - eps)
    cut = float(curve.r[np.argmax(flags)]) if np.any(flags) else math.inf
    return replace(curve, past_cut=flags, cut_time=min(cut, curve.cut_time))


def cut_times(grid, r_max, direction=1, eps=CUT_EPS, probes=64, xtol=1e-10):
    """Per-node cut time in ``[0, r_max]`` (``inf`` when never cut below r_max).

    Convex bodies are never cut along outward rays; otherwise probe a
    geometric schedule, then bisect on the minimality predicate.
    """
    N = len(grid)
    if grid.hypersurface.kind == "coordinate_sphere":
        return np.full(N, math.inf)
    shape = grid.hypersurface.shape
    if direction > 0 and shape.is_convex():
        return np.full(N, math.inf)
    nu = direction * grid.normal
    probe_r = np.concatenate([np.linspace(0.0, min(1.0, r_max), 17)[1:],
                              np.geomspace(min(1.0, r_max), r_max, probes)[1:]])
    probe_r = np.unique(probe_r)
    out = np.full(N, math.inf)
    for i in range(N):
        pts = grid.x[i] + probe_r[:, None] * nu[i]
        bad = _distance_along(grid, pts, direction) < probe_r - eps
        if not np.any(bad):
            continue
        j = int(np.argmax(bad))
        lo = probe_r[j - 1] if j > 0 else 0.0
        hi = probe_r[j]
        while hi - lo > xtol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            p = grid.x[i] + mid * nu[i]
            if _distance_along(grid, p[None], direction)[0] < mid - eps:
                hi = mid
            else:
                lo = mid
        out[i] = hi
    return out


# ---------------------------------------------------------------------------
# comparison bounds and monotone quantities


def lemma_bound(variant, n, H_f, r, a=0.0, k=0.0, m=None, tol=1e-10):
    """Upper bound on the f-Laplacian of the distance to the boundary.

    For variants ``a``/``b``, ``H_f`` in ``[-tol, 0)`` is treated as round-off
    and clamped to zero."""
    r = np.asarray(r, dtype=float)
    if variant in ("a", "b"):
        if H_f < -tol:
            raise HypothesisViolation("H_f_nonneg", f"H_f = {H_f} < 0 at the node")
        H_f = max(H_f, 0.0)
        d = n - 1 + H_f * r
        if variant == "a":
            if a < 0:
                raise DomainError("a must be non-negative")
            return (n - 1) * H_f / d + a - (n - 1) ** 2 * a / d ** 2
        if k < 0:
            raise DomainError("k must be non-negative")
        return (n - 1 + 4 * k) * H_f / d
    if variant == "m":
        if m is None or m < n:
            raise DomainError("variant m needs m >= n")
        if H_f < 0 and np.any(r >= (m - 1) / -H_f):
            raise DomainError("radius beyond the blow-up time (m-1)/H_f^-")
        return (m - 1) * H_f / (m - 1 + H_f * r)
    raise DomainError(f"unknown variant {variant!r}")


def theta_profile(variant, n, H_f, r, a=0.0, k=0.0, m=None):
    """Model profile dividing ``A_f`` in the monotone quantity."""
    r = np.asarray(r, dtype=float)
    if variant == "a":
        return np.exp(a * r) * (1.0 + H_f * r / (n - 1)) ** (n - 1)
    if variant == "b":
        return (1.0 + H_f * r / (n - 1)) ** (n - 1 + 4 * k)
    if variant == "m":
        return (1.0 + H_f * r / (m - 1)) ** (m - 1)
    raise DomainError(f"unknown variant {variant!r}")


def ray_hypotheses(curve, variant, a=0.0, k=0.0, m=None, tol=1e-10):
    """Hypothesis checks of the comparison lemmas, evaluated on the ray samples."""
    amb = curve.ambient
    ok = curve.valid
    pts = curve.points[ok]
    checks = {}
    if variant in ("a", "b"):
        checks["H_f_nonneg"] = {"value": curve.H_f, "passed": curve.H_f >= -tol}
        lam = np.linalg.eigvalsh(bakry_emery_at(amb, pts)).min() if len(pts) else 0.0
        checks["Ricf_nonneg"] = {"value": float(lam), "passed": bool(lam >= -tol)}
    if variant == "a":
        v = float(np.min(curve.dr_f[ok] + a)) if np.any(ok) else 0.0
        checks["drf_ge_minus_a"] = {"value": v, "passed": v >= -tol}
    if variant == "b":
        v = float(k - np.max(np.abs(curve.f_ray[ok]))) if np.any(ok) else 0.0
        checks["abs_f_le_k"] = {"value": v, "passed": v >= -tol}
    if variant == "m":
        try:
            lam = np.linalg.eigvalsh(bakry_emery_at(amb, pts, "m", m)).min()
        except Exception as exc:  # configuration problems are reported, not raised
            checks["Ricfm_nonneg"] = {"value": None, "passed": False, "error": str(exc)}
        else:
            checks["Ricfm_nonneg"] = {"value": float(lam), "passed": bool(lam >= -tol)}
    return checks


def comparison_residual(curve, variant, a=0.0, k=0.0, m=None):
    """``max(Delta_f r - bound)`` over valid samples (<= 0 when the lemma holds)."""
    ok = curve.valid
    b = lemma_bound(variant, curve.n, curve.H_f, curve.r[ok], a, k, m)
    return float(np.max(curve.delta_f_r[ok] - b)), b


@dataclass
class ThetaSeries:
    variant: str
    r: np.ndarray
    theta: np.ndarray
    max_forward_difference: float
    tolerance: float
    verdict: str
    hypotheses: dict


def theta_series(curve, variant, a=0.0, k=0.0, m=None, rel_tol=1e-8):
    ok = curve.valid
    r = curve.r[ok]
    theta = curve.A_f[ok] / theta_profile(variant, curve.n, curve.H_f, r, a, k, m)
    fwd = float(np.max(np.diff(theta))) if len(theta) > 1 else 0.0
    tol = rel_tol * max(1.0, abs(theta[0]))
    hyp = ray_hypotheses(curve, variant, a, k, m)
    if not all(c["passed"] for c in hyp.values()):
        verdict = "hypotheses unmet"
    else:
        verdict = "monotone" if fwd <= tol else "not monotone"
    return ThetaSeries(variant, r, theta, fwd, tol, verdict, hyp)


@dataclass
class ShrinkerSeries:
    c: float
    r: np.ndarray
    theta: np.ndarray
    K: np.ndarray
    volume_estimate_slack: np.ndarray
    K_max_forward_difference: float
    check: dict


def shrinker_constant(n, H, f, dnu_f):
    return H * f - (n - 1) * dnu_f + (n - 1) ** 2 / (4.0 * H)


def shrinker_K_series(curve, tol=1e-10):
    """Monotone quantity on shrinkers built from the unweighted area element."""
    amb = curve.ambient
    ok = curve.valid
    rep = check_curvature_condition(amb, np.vstack([curve.points[ok]]), "shrinker_half", tol=tol)
    if not rep.passed:
        raise HypothesisViolation(
            "shrinker_half",
            f"max|Ric_f - g/2| = {rep.ricf_residual:.3e}, "
            f"max|R + |grad f|^2 - f| = {rep.identity_residual:.3e}")
    n, H = curve.n, curve.H
    if not H > 0:
        raise HypothesisViolation("H_positive", f"H = {H} <= 0 at node {curve.node}")
    c = shrinker_constant(n, H, curve.f0, curve.dnu_f)
    r = curve.r[ok]
    A = curve.A[ok]
    log_theta = np.log(A) - (n - 1) * np.log1p(H * r / (n - 1))
    K = (n - 1 + H * r) * log_theta - c * r
    slack = np.exp(c * r / (n - 1 + H * r)) * (1.0 + H * r / (n - 1)) ** (n - 1) - A
    fwd = float(np.max(np.diff(K))) if len(K) > 1 else 0.0
    return ShrinkerSeries(float(c), r, np.exp(log_theta), K, slack, fwd, rep.as_dict())


# ---------------------------------------------------------------------------
# export


def curve_to_csv(path, curve, bound=None, theta=None, K=None):
    ok = curve.valid
    rows = len(curve.r)

    def col(v):
        if v is None:
            return [""] * rows
        full = np.full(rows, np.nan)
        full[ok] = v
        return [repr(float(x)) for x in full]

    bcol, tcol, kcol = col(bound), col(theta), col(K)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "A", "A_f", "delta_f_r", "bound", "theta", "K", "flags"])
        for i in range(rows):
            flags = "|".join(name for name, on in (("past_focal", curve.past_focal[i]),
                                                   ("past_cut", curve.past_cut[i])) if on)
            w.writerow([repr(float(curve.r[i])), repr(float(curve.A[i])), repr(float(curve.A_f[i])),
                        repr(float(curve.delta_f_r[i])), bcol[i], tcol[i], kcol[i], flags])
