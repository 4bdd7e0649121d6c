"""Weighted ambient spaces and their curvature oracles.

Three metric models are supported:

* ``flat``: Euclidean R^n in Cartesian coordinates.
* ``radial_warped``: ``dr^2 + h(r)^2 g_{S^{n-1}}`` around a pole.  Points are
  stored in a pseudo-Cartesian chart ``x = r * omega`` so that ``|x| = r``;
  tensors are returned in the g-orthonormal frame whose radial leg is
  ``omega`` and whose fiber legs are the Euclidean directions orthogonal to
  it.  For ``h(r) = r`` this frame is the Cartesian one.
* ``product_cylinder``: ``[0, l] x S^{n-1}(rho_N)`` with points
  ``(t, phi_1, ..., phi_{n-1})`` and frame ``(d_t, fiber...)``.

All symmetric forms are ``(..., n, n)`` arrays; every oracle broadcasts over
leading axes of the point array.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, UnsupportedError

# ---------------------------------------------------------------------------
# warping profiles


@dataclass(frozen=True)
class WarpingProfile:
    name: str
    h: Callable
    dh: Callable
    d2h: Callable
    params: dict = field(default_factory=dict)


def euclidean_profile():
    return WarpingProfile(
        "euclidean",
        lambda r: np.asarray(r, dtype=float),
        lambda r: np.ones_like(np.asarray(r, dtype=float)),
        lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    )


def cone_profile(alpha=1.0):
    """``h(r) = alpha r``; singular at the tip unless ``alpha == 1``."""
    if not 0 < alpha <= 1:
        raise ConfigurationError("cone aperture must lie in (0, 1]")
    return WarpingProfile(
        "cone",
        lambda r: alpha * np.asarray(r, dtype=float),
        lambda r: np.full_like(np.asarray(r, dtype=float), alpha),
        lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        {"alpha": alpha},
    )


def capped_cone_profile(alpha=0.8):
    """Smooth asymptotically conical profile ``alpha r + (1 - alpha) tanh r``.

    ``h'' <= 0`` and ``h' <= 1`` so Ric >= 0; the asymptotic cone has
    aperture ``alpha``.
    """
    if not 0 < alpha <= 1:
        raise ConfigurationError("cone aperture must lie in (0, 1]")
    b = 1.0 - alpha

    def d2h(r):
        t = np.tanh(r)
        return -2.0 * b * t * (1.0 - t * t)

    return WarpingProfile(
        "capped_cone",
        lambda r: alpha * np.asarray(r, dtype=float) + b * np.tanh(r),
        lambda r: alpha + b * (1.0 - np.tanh(r) ** 2),
        d2h,
        {"alpha": alpha},
    )


def hyperbolic_profile():
    return WarpingProfile("hyperbolic", np.sinh, np.cosh, np.sinh)


PROFILES = {
    "euclidean": euclidean_profile,
    "cone": cone_profile,
    "capped_cone": capped_cone_profile,
    "hyperbolic": hyperbolic_profile,
}


# ---------------------------------------------------------------------------
# weight functions


@dataclass(frozen=True)
class WeightFunction:
    """A smooth weight ``f`` with Cartesian oracles.

    ``radial_profile(r)`` returns ``(f, f', f'')`` when ``f`` depends only on
    the distance to the origin / pole; warped and cylinder ambients require it.
    """

    name: str
    value: Callable
    gradient: Callable
    hessian: Callable
    radial_profile: Optional[Callable] = None
    is_constant: bool = False
    bound_a: Optional[float] = None
    bound_k: Optional[float] = None
    params: dict = field(default_factory=dict)


def _radial_oracles(profile):
    def value(x):
        x = np.asarray(x, dtype=float)
        return profile(np.linalg.norm(x, axis=-1))[0]

    def gradient(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        _, d1, _ = profile(r)
        safe = np.where(r > 0, r, 1.0)
        return (d1 / safe)[..., None] * x

    def hessian(x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        r = np.linalg.norm(x, axis=-1)
        _, d1, d2 = profile(r)
        safe = np.where(r > 0, r, 1.0)
        u = x / safe[..., None]
        uu = u[..., :, None] * u[..., None, :]
        eye = np.eye(n)
        tang = np.where(r > 0, d1 / safe, d2)
        return d2[..., None, None] * uu + tang[..., None, None] * (eye - uu)

    return value, gradient, hessian


def zero_weight():
    return constant_weight(0.0, name="zero")


def constant_weight(c=0.0, name="constant"):
    c = float(c)

    def profile(r):
        r = np.asarray(r, dtype=float)
        return np.full_like(r, c), np.zeros_like(r), np.zeros_like(r)

    value, gradient, hessian = _radial_oracles(profile)
    return WeightFunction(name, value, gradient, hessian, profile, True,
                          bound_a=0.0, bound_k=abs(c), params={"value": c})


def gaussian_weight(scale=0.25, center=None):
    """``f = scale |x - center|^2``; ``scale = 1/4`` is the Gaussian shrinker."""
    scale = float(scale)
    c = None if center is None else np.asarray(center, dtype=float)

    def shift(x):
        x = np.asarray(x, dtype=float)
        return x if c is None else x - c

    def value(x):
        y = shift(x)
        return scale * np.sum(y * y, axis=-1)

    def gradient(x):
        return 2.0 * scale * shift(x)

    def hessian(x):
        y = shift(x)
        n = y.shape[-1]
        return np.broadcast_to(2.0 * scale * np.eye(n), y.shape + (n,)).copy()

    profile = None
    if c is None or not np.any(c):
        def profile(r):
            r = np.asarray(r, dtype=float)
            return scale * r * r, 2.0 * scale * r, np.full_like(r, 2.0 * scale)

    return WeightFunction("gaussian", value, gradient, hessian, profile,
                          params={"scale": scale,
                                  "center": None if c is None else c.tolist()})


def linear_weight(slope, offset=0.0):
    b = np.asarray(slope, dtype=float)
    offset = float(offset)

    def value(x):
        return np.asarray(x, dtype=float) @ b + offset

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(b, x.shape).copy()

    def hessian(x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return np.zeros(x.shape + (n,))

    return WeightFunction("linear", value, gradient, hessian,
                          bound_a=float(np.linalg.norm(b)),
                          params={"slope": b.tolist(), "offset": offset})


def radial_poly_weight(coeffs):
    """``f(r) = sum_i coeffs[i] r^i``.  Smooth at the origin only for even powers."""
    p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    p1, p2 = p.deriv(1), p.deriv(2)

    def profile(r):
        r = np.asarray(r, dtype=float)
        return p(r), p1(r), p2(r)

    value, gradient, hessian = _radial_oracles(profile)
    return WeightFunction("radial_poly", value, gradient, hessian, profile,
                          params={"coeffs": list(map(float, coeffs))})


def radial_bump_weight(amplitude=0.2, width=1.0):
    """``f(r) = amplitude * exp(-r^2 / width^2)``, a bounded radial weight."""
    A, w2 = float(amplitude), float(width) ** 2

    def profile(r):
        r = np.asarray(r, dtype=float)
        e = A * np.exp(-r * r / w2)
        return e, -2.0 * r / w2 * e, (4.0 * r * r / w2 - 2.0) / w2 * e

    value, gradient, hessian = _radial_oracles(profile)
    return WeightFunction("radial_bump", value, gradient, hessian, profile,
                          params={"amplitude": A, "width": float(width)})


WEIGHTS = {
    "zero": lambda: zero_weight(),
    "constant": constant_weight,
    "gaussian": gaussian_weight,
    "linear": linear_weight,
    "radial_poly": radial_poly_weight,
    "radial_bump": radial_bump_weight,
}


def check_weight_derivatives(weight, points, step=1e-5):
    """Max relative mismatch of the gradient/Hessian oracles against central
    differences of the value oracle.  Returns ``(grad_err, hess_err)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    g_err = h_err = 0.0
    for x in pts:
        g = weight.gradient(x)
        H = weight.hessian(x)
        g_fd = np.empty(n)
        H_fd = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            g_fd[i] = (weight.value(x + e) - weight.value(x - e)) / (2 * step)
            H_fd[i] = (weight.gradient(x + e) - weight.gradient(x - e)) / (2 * step)
        g_err = max(g_err, np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g))))
        h_err = max(h_err, np.max(np.abs(H - H_fd)) / max(1.0, np.max(np.abs(H))))
    return g_err, h_err


# ---------------------------------------------------------------------------
# ambient


@dataclass(frozen=True)
class WeightedAmbient:
    n: int
    weight: WeightFunction
    model: str = "flat"
    profile: Optional[WarpingProfile] = None
    fiber_radius: float = 1.0
    length: float = 1.0
    m_synthetic: Optional[float] = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError("dimension n must be at least 2")
        if self.model not in ("flat", "radial_warped", "product_cylinder"):
            raise ConfigurationError(f"unknown metric model {self.model!r}")
        if self.model == "radial_warped" and self.profile is None:
            raise ConfigurationError("radial_warped ambient needs a warping profile")
        if self.model != "flat" and self.weight.radial_profile is None:
            raise ConfigurationError(
                "non-flat ambients need a radial (or constant) weight")
        m = self.m_synthetic
        if m is not None:
            if m < self.n:
                raise ConfigurationError("synthetic dimension m must be >= n")
            if m == self.n and not self.weight.is_constant:
                raise ConfigurationError("m = n requires a constant weight")

    # -- chart helpers -----------------------------------------------------
    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DomainError(f"point has dimension {x.shape[-1]}, expected {self.n}")
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite point")
        if self.model == "radial_warped":
            if np.any(np.linalg.norm(x, axis=-1) <= 0):
                raise DomainError("the pole r = 0 is outside the polar chart")
        elif self.model == "product_cylinder":
            t = x[..., 0]
            if np.any(t < 0) or np.any(t > self.length):
                raise DomainError("axis coordinate outside [0, l]")
        return x

    def radius(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    # -- weight ------------------------------------------------------------
    def f(self, x):
        x = self._check(x)
        if self.model == "flat":
            return self.weight.value(x)
        return self.weight.radial_profile(self._radial_coordinate(x))[0]

    def grad_f(self, x):
        x = self._check(x)
        if self.model == "flat":
            return self.weight.gradient(x)
        _, d1, _ = self.weight.radial_profile(self._radial_coordinate(x))
        return d1[..., None] * self._radial_direction(x)

    def hess_f(self, x):
        x = self._check(x)
        if self.model == "flat":
            return self.weight.hessian(x)
        e, P = self._frame_projectors(x)
        s = self._radial_coordinate(x)
        _, d1, d2 = self.weight.radial_profile(s)
        if self.model == "product_cylinder":
            return d2[..., None, None] * e
        h, dh = self.profile.h(s), self.profile.dh(s)
        return d2[..., None, None] * e + (d1 * dh / h)[..., None, None] * P

    def _radial_coordinate(self, x):
        if self.model == "product_cylinder":
            return x[..., 0]
        return np.linalg.norm(x, axis=-1)

    def _radial_direction(self, x):
        if self.model == "product_cylinder":
            e = np.zeros(x.shape)
            e[..., 0] = 1.0
            return e
        return x / np.linalg.norm(x, axis=-1)[..., None]

    def _frame_projectors(self, x):
        u = self._radial_direction(x)
        e = u[..., :, None] * u[..., None, :]
        return e, np.eye(self.n) - e

    # -- curvature ---------------------------------------------------------
    def ricci(self, x):
        x = self._check(x)
        n = self.n
        if self.model == "flat":
            return np.zeros(x.shape + (n,))
        e, P = self._frame_projectors(x)
        if self.model == "product_cylinder":
            fib = (n - 2) / self.fiber_radius ** 2
            return np.broadcast_to(fib * P, x.shape + (n,)).copy()
        r = np.linalg.norm(x, axis=-1)
        h, dh, d2h = self.profile.h(r), self.profile.dh(r), self.profile.d2h(r)
        rad = -(n - 1) * d2h / h
        fib = (-d2h * h + (n - 2) * (1.0 - dh * dh)) / (h * h)
        return rad[..., None, None] * e + fib[..., None, None] * P

    def scalar_curvature(self, x):
        return np.trace(self.ricci(x), axis1=-2, axis2=-1)

    def radial_sectional_curvature(self, r):
        """Sectional curvature of planes containing ``d_r`` (``-h''/h``)."""
        if self.model == "flat":
            return np.zeros_like(np.asarray(r, dtype=float))
        if self.model != "radial_warped":
            raise UnsupportedError("radial curvature only defined on warped models")
        return -self.profile.d2h(r) / self.profile.h(r)


def flat_ambient(n, weight=None, m=None):
    return WeightedAmbient(n, weight or zero_weight(), "flat", m_synthetic=m)


def warped_ambient(n, profile, weight=None, m=None):
    return WeightedAmbient(n, weight or zero_weight(), "radial_warped",
                           profile=profile, m_synthetic=m)


def cylinder_ambient(n, fiber_radius=1.0, length=1.0, weight=None):
    return WeightedAmbient(n, weight or zero_weight(), "product_cylinder",
                           fiber_radius=fiber_radius, length=length)


# ---------------------------------------------------------------------------
# operations


def ricci_at(ambient, x):
    return ambient.ricci(x)


def bakry_emery_at(ambient, x, mode="infinity", m=None):
    """Ric_f (``mode='infinity'``) or Ric_f^m (``mode='m'``) at ``x``."""
    ric = ambient.ricci(x) + ambient.hess_f(x)
    if mode == "infinity":
        return ric
    if mode != "m":
        raise ConfigurationError(f"unknown Bakry-Emery mode {mode!r}")
    m = ambient.m_synthetic if m is None else float(m)
    if m is None:
        raise ConfigurationError("m mode needs a synthetic dimension")
    if m < ambient.n:
        raise ConfigurationError("synthetic dimension m must be >= n")
    if m == ambient.n:
        if not ambient.weight.is_constant:
            raise ConfigurationError("m = n requires a constant weight")
        return ric
    g = ambient.grad_f(x)
    return ric - g[..., :, None] * g[..., None, :] / (m - ambient.n)


@dataclass
class ConditionReport:
    condition: str
    min_eigenvalue: float
    passed: bool
    tolerance: float
    n_points: int
    grid: dict
    ricf_residual: Optional[float] = None
    identity_residual: Optional[float] = None
    worst_point: Optional[list] = None

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def cartesian_grid(n, half_width=3.0, points_per_axis=10, center=None):
    axis = np.linspace(-half_width, half_width, points_per_axis)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def polar_grid(n, radii, resolution=6):
    from .hypersurface import sphere_nodes
    _, omega, _ = sphere_nodes(n, resolution)
    radii = np.asarray(radii, dtype=float)
    return (radii[:, None, None] * omega[None, :, :]).reshape(-1, n)


def check_curvature_condition(ambient, points, condition, tol=1e-10, m=None, grid_spec=None):
    """Grid-sampled check of ``Ric_f >= 0``, ``Ric_f^m >= 0`` or the shrinker
    normalisation ``Ric_f = g/2, R + |grad f|^2 = f``.  Never raises on failure."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    spec = dict(grid_spec or {})
    spec.setdefault("n_points", len(pts))
    if condition == "Ricf_nonneg":
        form = bakry_emery_at(ambient, pts)
    elif condition == "Ricfm_nonneg":
        form = bakry_emery_at(ambient, pts, "m", m)
    elif condition == "shrinker_half":
        form = bakry_emery_at(ambient, pts)
    else:
        raise ConfigurationError(f"unknown condition {condition!r}")
    eig = np.linalg.eigvalsh(form)
    lam = eig.min(axis=-1)
    worst = int(np.argmin(lam))
    rep = ConditionReport(condition, float(lam[worst]), bool(lam[worst] >= -tol), tol,
                          len(pts), spec, worst_point=pts[worst].tolist())
    if condition == "shrinker_half":
        res = form - 0.5 * np.eye(ambient.n)
        ricf_res = float(np.max(np.abs(res)))
        g = ambient.grad_f(pts)
        ident = ambient.scalar_curvature(pts) + np.sum(g * g, axis=-1) - ambient.f(pts)
        id_res = float(np.max(np.abs(ident)))
        rep.ricf_residual = ricf_res
        rep.identity_residual = id_res
        rep.passed = ricf_res <= tol and id_res <= tol
    return rep


# -- scalar fields -------------------------------------------------------


@dataclass(frozen=True)
class CartesianField:
    """Scalar field on a flat ambient with value/gradient/Hessian oracles."""
    value: Callable
    gradient: Callable
    hessian: Callable


@dataclass(frozen=True)
class RadialField:
    """Scalar field ``u(r)`` on a radial model, with ``u, u', u''``."""
    u: Callable
    du: Callable
    d2u: Callable


def _warped_terms(ambient, r):
    if ambient.model == "flat":
        h, dh, d2h = r, np.ones_like(r), np.zeros_like(r)
    elif ambient.model == "radial_warped":
        p = ambient.profile
        h, dh, d2h = p.h(r), p.dh(r), p.d2h(r)
    else:
        raise UnsupportedError("radial fields need a flat or warped ambient")
    return h, dh, d2h


def f_laplacian(ambient, u, x):
    """``Delta u - <grad f, grad u>`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if isinstance(u, RadialField):
        r = ambient.radius(x)
        h, dh, _ = _warped_terms(ambient, r)
        _, df, _ = ambient.weight.radial_profile(r)
        return u.d2u(r) + ((ambient.n - 1) * dh / h - df) * u.du(r)
    if ambient.model != "flat":
        raise UnsupportedError("Cartesian fields are only defined on flat ambients")
    lap = np.trace(u.hessian(x), axis1=-2, axis2=-1)
    return lap - np.sum(ambient.grad_f(x) * u.gradient(x), axis=-1)


def bochner_residual(ambient, u, x, step=1e-4):
    """``(1/2) Delta_f |grad u|^2 - |Hess u|^2 - <grad Delta_f u, grad u>
    - Ric_f(grad u, grad u)``; third derivatives by central differences."""
    x = np.asarray(x, dtype=float)
    n = ambient.n
    if isinstance(u, RadialField):
        r = float(ambient.radius(x))
        h, dh, d2h = _warped_terms(ambient, np.asarray(r))
        _, df, d2f = ambient.weight.radial_profile(np.asarray(r))
        mean = (n - 1) * dh / h - df

        def dq(s):
            return 2.0 * u.du(s) * u.d2u(s)

        def lapf(s):
            s = np.asarray(s, dtype=float)
            hh, dd, _ = _warped_terms(ambient, s)
            _, ff, _ = ambient.weight.radial_profile(s)
            return u.d2u(s) + ((n - 1) * dd / hh - ff) * u.du(s)

        d2q = (dq(r + step) - dq(r - step)) / (2 * step)
        half_lapf_q = 0.5 * (d2q + mean * dq(r))
        hess2 = u.d2u(r) ** 2 + (n - 1) * (u.du(r) * dh / h) ** 2
        dlapf = (lapf(r + step) - lapf(r - step)) / (2 * step)
        ricf = -(n - 1) * d2h / h + d2f
        return float(half_lapf_q - hess2 - dlapf * u.du(r) - ricf * u.du(r) ** 2)

    if ambient.model != "flat":
        raise UnsupportedError("Cartesian fields are only defined on flat ambients")

    def grad_q(y):
        return 2.0 * u.hessian(y) @ u.gradient(y)

    def lapf_u(y):
        return np.trace(u.hessian(y)) - ambient.grad_f(y) @ u.gradient(y)

    lap_q = 0.0
    grad_lapf = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        lap_q += (grad_q(x + e)[i] - grad_q(x - e)[i]) / (2 * step)
        grad_lapf[i] = (lapf_u(x + e) - lapf_u(x - e)) / (2 * step)
    g = u.gradient(x)
    H = u.hessian(x)
    half_lapf_q = 0.5 * (lap_q - ambient.grad_f(x) @ grad_q(x))
    ricf = bakry_emery_at(ambient, x)
    return float(half_lapf_q - np.sum(H * H) - grad_lapf @ g - g @ ricf @ g)
