"""Closed star-shaped hypersurfaces, their extrinsic geometry and quadrature.

A hypersurface is either a radial graph ``c + rho(omega) omega`` in a flat
ambient (sphere, ellipsoid, quadric perturbation of a sphere) or a level
sphere ``{r = r0}`` around the pole of a warped ambient.  Extrinsic
quantities use the outward unit normal, so round spheres have ``H > 0``.
"""
import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DegenerateImmersion, UnsupportedError

# ---------------------------------------------------------------------------
# sphere parametrisation


def angles_to_omega(angles):
    """Hyperspherical angles ``(phi_1, ..., phi_{n-1})`` to unit vectors."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    N, k = angles.shape
    n = k + 1
    omega = np.empty((N, n))
    s = np.ones(N)
    for i in range(k):
        omega[:, i] = s * np.cos(angles[:, i])
        s = s * np.sin(angles[:, i])
    omega[:, n - 1] = s
    return omega


def sphere_nodes(n, resolution):
    """Tensor-product rule on S^{n-1}.

    Polar angles use Gauss-Legendre on ``[0, pi]`` with the sin-power
    Jacobian folded into the weights; the azimuth uses the periodic
    trapezoid rule.  Returns ``(angles, omega, weights)``.
    """
    if resolution < 4:
        raise ConfigurationError("resolution must be at least 4 per angle")
    if n < 2:
        raise ConfigurationError("n must be at least 2")
    x, w = np.polynomial.legendre.leggauss(resolution)
    polar = 0.5 * np.pi * (x + 1.0)
    polar_w = 0.5 * np.pi * w
    az = 2.0 * np.pi * np.arange(resolution) / resolution
    az_w = np.full(resolution, 2.0 * np.pi / resolution)
    axes = [polar] * (n - 2) + [az]
    axw = [polar_w * np.sin(polar) ** (n - 2 - i) for i in range(n - 2)] + [az_w]
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*axw, indexing="ij")
    angles = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return angles, angles_to_omega(angles), weights


def tangent_basis(normal):
    """Orthonormal bases of the complements of unit vectors, via Householder."""
    normal = np.atleast_2d(normal)
    N, n = normal.shape
    sign = np.where(normal[:, 0] >= 0, 1.0, -1.0)
    w = normal.copy()
    w[:, 0] += sign
    Q = np.eye(n)[None] - 2.0 * w[:, :, None] * w[:, None, :] / np.sum(w * w, axis=1)[:, None, None]
    return Q[:, :, 1:]


# ---------------------------------------------------------------------------
# flat star-shaped bodies


class StarShape:
    """Body bounded by a radial graph about ``center``.

    Subclasses supply ``rho(omega)`` and ``defining(y)`` returning a defining
    function ``G`` (negative inside) with its gradient and Hessian at points
    ``y`` relative to the center.
    """

    kind = "radial_graph"

    def __init__(self, center):
        self.center = np.asarray(center, dtype=float)
        self.n = len(self.center)

    def rho(self, omega):
        raise NotImplementedError

    def defining(self, y):
        raise NotImplementedError

    @property
    def rho_max(self):
        _, omega, _ = sphere_nodes(self.n, 24)
        return float(np.max(self.rho(omega))) * 1.01

    def project(self, points):
        """Radial projection of points onto the surface."""
        y = np.atleast_2d(points) - self.center
        omega = y / np.linalg.norm(y, axis=1)[:, None]
        return self.center + self.rho(omega)[:, None] * omega

    def contains(self, points):
        y = np.atleast_2d(points) - self.center
        return self.defining(y)[0] < 0

    def normal_at(self, points):
        y = np.atleast_2d(points) - self.center
        g = self.defining(y)[1]
        return g / np.linalg.norm(g, axis=1)[:, None]

    def distance_to_boundary(self, points):
        """Euclidean distance to the surface.

        Dense sampling picks a start on the right sheet; a batched Newton
        solve of the Lagrange system ``q - p + lam grad G(q) = 0, G(q) = 0``
        polishes it.  Points where Newton stalls fall back to BFGS.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tree, dense_omega = self._dense()
        d0, idx = tree.query(pts)
        y0 = self.rho(dense_omega[idx])[:, None] * dense_omega[idx]
        p = pts - self.center
        q = y0.copy()
        G, g, _ = self.defining(q)
        lam = -np.sum((q - p) * g, axis=1) / np.sum(g * g, axis=1)
        eye = np.eye(self.n)
        for _ in range(40):
            G, g, Hs = self.defining(q)
            F = np.concatenate([q - p + lam[:, None] * g, G[:, None]], axis=1)
            J = np.zeros((len(q), self.n + 1, self.n + 1))
            J[:, :self.n, :self.n] = eye + lam[:, None, None] * Hs
            J[:, :self.n, self.n] = g
            J[:, self.n, :self.n] = g
            try:
                step = np.linalg.solve(J, F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
            q = q - step[:, :self.n]
            lam = lam - step[:, self.n]
            if np.max(np.abs(step)) < 1e-15 * (1.0 + np.max(np.abs(q))):
                break
        G = self.defining(q)[0]
        d = np.linalg.norm(q - p, axis=1)
        good = np.isfinite(d) & (np.abs(G) < 1e-12) & (d <= d0 + 1e-12)
        out = np.where(good, np.minimum(d, d0), d0)
        for i in np.flatnonzero(~good):
            out[i] = self._distance_bfgs(pts[i], dense_omega[idx[i]])
        return out

    def _distance_bfgs(self, p, start):
        def obj(v):
            om = v / np.linalg.norm(v)
            q = self.center + self.rho(om[None])[0] * om
            return np.sum((q - p) ** 2)
        res = minimize(obj, start, method="BFGS", options={"gtol": 1e-14, "xrtol": 1e-14})
        return float(np.sqrt(max(min(res.fun, obj(start)), 0.0)))

    def _dense(self):
        if getattr(self, "_dense_cache", None) is None:
            if self.n == 2:
                t = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
                omega = np.stack([np.cos(t), np.sin(t)], axis=1)
            else:
                v = np.random.default_rng(0).standard_normal((20000 * (self.n - 2), self.n))
                omega = v / np.linalg.norm(v, axis=1)[:, None]
            pts = self.center + self.rho(omega)[:, None] * omega
            self._dense_cache = (cKDTree(pts), omega)
        return self._dense_cache

    def is_convex(self, resolution=24):
        _, omega, _ = sphere_nodes(self.n, resolution)
        y = self.rho(omega)[:, None] * omega
        _, g, H = self.defining(y)
        nu = g / np.linalg.norm(g, axis=1)[:, None]
        T = tangent_basis(nu)
        S = np.einsum("nia,nij,njb->nab", T, H, T)
        return bool(np.all(np.linalg.eigvalsh(S) >= -1e-12))

    def describe(self):
        return {"kind": self.kind, "center": self.center.tolist()}


class Sphere(StarShape):
    kind = "sphere"

    def __init__(self, center, radius):
        super().__init__(center)
        if radius <= 0:
            raise ConfigurationError("sphere radius must be positive")
        self.radius = float(radius)

    def rho(self, omega):
        return np.full(np.atleast_2d(omega).shape[0], self.radius)

    @property
    def rho_max(self):
        return self.radius

    def defining(self, y):
        y = np.atleast_2d(y)
        s = np.linalg.norm(y, axis=1)
        u = y / s[:, None]
        H = (np.eye(self.n)[None] - u[:, :, None] * u[:, None, :]) / s[:, None, None]
        return s - self.radius, u, H

    def distance_to_boundary(self, points):
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return np.abs(d - self.radius)

    def is_convex(self, resolution=24):
        return True

    def describe(self):
        return {"kind": "sphere", "center": self.center.tolist(), "radius": self.radius}


class Ellipsoid(StarShape):
    kind = "ellipsoid"

    def __init__(self, center, axes):
        super().__init__(center)
        self.axes = np.asarray(axes, dtype=float)
        if self.axes.shape != self.center.shape or np.any(self.axes <= 0):
            raise ConfigurationError("ellipsoid needs one positive semi-axis per dimension")

    def rho(self, omega):
        omega = np.atleast_2d(omega)
        return 1.0 / np.sqrt(np.sum(omega ** 2 / self.axes ** 2, axis=1))

    @property
    def rho_max(self):
        return float(self.axes.max())

    def defining(self, y):
        y = np.atleast_2d(y)
        D = 1.0 / self.axes ** 2
        q = np.sqrt(np.sum(D * y * y, axis=1))
        g = D * y / q[:, None]
        H = (np.diag(D)[None] - g[:, :, None] * g[:, None, :]) / q[:, None, None]
        return q - 1.0, g, H

    def distance_to_boundary(self, points):
        """Exact distance for exterior points (monotone Newton on the
        Lagrange multiplier); interior points fall back to the generic path."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        y = pts - self.center
        a2 = self.axes ** 2
        outside = np.sum(y * y / a2, axis=1) >= 1.0
        out = np.empty(len(pts))
        if np.any(outside):
            yo = y[outside]
            t = np.zeros(len(yo))
            for _ in range(200):
                d = t[:, None] + a2
                g = np.sum(a2 * yo ** 2 / d ** 2, axis=1) - 1.0
                dg = -2.0 * np.sum(a2 * yo ** 2 / d ** 3, axis=1)
                step = g / dg
                t = t - step
                if np.all(np.abs(step) <= 1e-15 * (1.0 + t)):
                    break
            near = a2 * yo / (t[:, None] + a2)
            out[outside] = np.linalg.norm(yo - near, axis=1)
        if np.any(~outside):
            out[~outside] = super().distance_to_boundary(pts[~outside])
        return out

    def is_convex(self, resolution=24):
        return True

    def describe(self):
        return {"kind": "ellipsoid", "center": self.center.tolist(), "axes": self.axes.tolist()}


class QuadricGraph(StarShape):
    """``rho(omega) = base_radius + omega^T C omega`` (e.g. ``1 + 0.5 cos 2theta``)."""

    kind = "quadric_graph"

    def __init__(self, center, base_radius, matrix):
        super().__init__(center)
        self.base_radius = float(base_radius)
        C = np.asarray(matrix, dtype=float)
        if C.shape != (self.n, self.n):
            raise ConfigurationError("quadric matrix must be n x n")
        self.C = 0.5 * (C + C.T)
        lo = self.base_radius + np.linalg.eigvalsh(self.C).min()
        if lo <= 0:
            raise ConfigurationError("radial graph must stay away from the center")

    def rho(self, omega):
        omega = np.atleast_2d(omega)
        return self.base_radius + np.einsum("ni,ij,nj->n", omega, self.C, omega)

    @property
    def rho_max(self):
        return self.base_radius + float(np.linalg.eigvalsh(self.C).max())

    def defining(self, y):
        y = np.atleast_2d(y)
        n = self.n
        s = np.linalg.norm(y, axis=1)
        Cy = y @ self.C
        Q = np.sum(y * Cy, axis=1)
        s2, s4, s6 = s ** 2, s ** 4, s ** 6
        G = s - self.base_radius - Q / s2
        grad = y / s[:, None] - 2 * Cy / s2[:, None] + 2 * (Q / s4)[:, None] * y
        yy = y[:, :, None] * y[:, None, :]
        eye = np.eye(n)[None]
        hess_s = (eye - yy / s2[:, None, None]) / s[:, None, None]
        hess_q = (2 * self.C[None] / s2[:, None, None]
                  - 4 * (Cy[:, :, None] * y[:, None, :] + y[:, :, None] * Cy[:, None, :]) / s4[:, None, None]
                  - 2 * (Q / s4)[:, None, None] * eye
                  + 8 * (Q / s6)[:, None, None] * yy)
        return G, grad, hess_s - hess_q

    def describe(self):
        return {"kind": "quadric_graph", "center": self.center.tolist(),
                "base_radius": self.base_radius, "matrix": self.C.tolist()}


# ---------------------------------------------------------------------------
# hypersurfaces


@dataclass(frozen=True)
class Hypersurface:
    """``kind`` is ``radial_graph`` (flat ambient, ``shape`` set) or
    ``coordinate_sphere`` (level set ``r = radius`` of a warped ambient).
    ``orientation = -1`` flips the normal (inward probe)."""

    kind: str
    shape: Optional[StarShape] = None
    radius: Optional[float] = None
    orientation: int = 1

    def __post_init__(self):
        if self.kind == "radial_graph" and self.shape is None:
            raise ConfigurationError("radial graph needs a shape")
        if self.kind == "coordinate_sphere" and not (self.radius and self.radius > 0):
            raise ConfigurationError("coordinate sphere needs a positive radius")
        if self.kind not in ("radial_graph", "coordinate_sphere"):
            raise ConfigurationError(f"unknown hypersurface kind {self.kind!r}")

    @property
    def center(self):
        if self.kind == "coordinate_sphere":
            return None
        return self.shape.center

    def flipped(self):
        return Hypersurface(self.kind, self.shape, self.radius, -self.orientation)

    def describe(self):
        d = self.shape.describe() if self.shape is not None else {
            "kind": "coordinate_sphere", "radius": self.radius}
        d["orientation"] = self.orientation
        return d


def radial_graph(shape):
    return Hypersurface("radial_graph", shape=shape)


def coordinate_sphere(radius):
    return Hypersurface("coordinate_sphere", radius=float(radius))


def _check_compatible(hyp, ambient):
    if hyp.kind == "radial_graph":
        if ambient.model != "flat":
            raise UnsupportedError("radial graphs are only supported in flat ambients")
        if hyp.shape.n != ambient.n:
            raise ConfigurationError("hypersurface and ambient dimensions differ")
    elif ambient.model != "radial_warped":
        raise UnsupportedError("coordinate spheres need a radial warped ambient")


def _geometry_batch(hyp, ambient, omega):
    """Extrinsic data at the points of ``hyp`` above the directions ``omega``."""
    _check_compatible(hyp, ambient)
    omega = np.atleast_2d(omega)
    N, n = omega.shape
    o = hyp.orientation
    if hyp.kind == "coordinate_sphere":
        r0 = hyp.radius
        p = ambient.profile
        h, dh = float(p.h(r0)), float(p.dh(r0))
        x = r0 * omega
        nu = o * omega
        T = tangent_basis(omega)
        kappa = np.full((N, n - 1), o * dh / h)
        shape_op = o * (dh / h) * np.broadcast_to(np.eye(n - 1), (N, n - 1, n - 1)).copy()
        J = np.full(N, h ** (n - 1))
    else:
        shape = hyp.shape
        rho = shape.rho(omega)
        y = rho[:, None] * omega
        x = shape.center + y
        _, g, HG = shape.defining(y)
        gnorm = np.linalg.norm(g, axis=1)
        bad = np.nonzero(~(gnorm > 1e-14))[0]
        if len(bad):
            raise DegenerateImmersion(
                f"singular first fundamental form at node {int(bad[0])} (x={x[bad[0]].tolist()})",
                node=int(bad[0]))
        nu_out = g / gnorm[:, None]
        cos = np.sum(nu_out * omega, axis=1)
        bad = np.nonzero(~(cos > 1e-12))[0]
        if len(bad):
            raise UnsupportedError(
                f"surface is not a transversal radial graph at node {int(bad[0])}")
        T = tangent_basis(nu_out)
        shape_op = np.einsum("nia,nij,njb->nab", T, HG, T) / gnorm[:, None, None]
        shape_op = o * shape_op
        nu = o * nu_out
        kappa = np.linalg.eigvalsh(0.5 * (shape_op + np.swapaxes(shape_op, 1, 2)))
        J = rho ** (n - 1) / cos
    H = np.trace(shape_op, axis1=1, axis2=2)
    f = ambient.f(x)
    dnu_f = np.sum(ambient.grad_f(x) * nu, axis=1)
    return {"x": x, "normal": nu, "tangent": T, "shape": shape_op, "kappa": kappa,
            "H": H, "H_f": H - dnu_f, "area_factor": J, "f": f, "dnu_f": dnu_f}


@dataclass(frozen=True)
class NodeGeometry:
    x: np.ndarray
    normal: np.ndarray
    shape: np.ndarray
    kappa: np.ndarray
    H: float
    H_f: float
    area_factor: float
    f: float
    dnu_f: float


def geometry_at(hyp, ambient, param):
    """Geometry at one parameter point (hyperspherical angles)."""
    omega = angles_to_omega(np.atleast_1d(param)[None])
    g = _geometry_batch(hyp, ambient, omega)
    return NodeGeometry(g["x"][0], g["normal"][0], g["shape"][0], g["kappa"][0],
                        float(g["H"][0]), float(g["H_f"][0]), float(g["area_factor"][0]),
                        float(g["f"][0]), float(g["dnu_f"][0]))


def shape_operator_fd(hyp, ambient, param, step=1e-5):
    """Shape operator by central differences of the normal field along
    tangent directions (radially re-projected); independent of the
    defining-function Hessian.  Returned in the same tangent basis."""
    if hyp.kind != "radial_graph":
        raise UnsupportedError("finite-difference check needs a flat radial graph")
    shape = hyp.shape
    omega = angles_to_omega(np.atleast_1d(param)[None])
    g = _geometry_batch(hyp, ambient, omega)
    p, T = g["x"][0], g["tangent"][0]
    n = shape.n
    W = np.empty((n - 1, n - 1))
    for j in range(n - 1):
        qp = shape.project(p + step * T[:, j])
        qm = shape.project(p - step * T[:, j])
        dnu = hyp.orientation * (shape.normal_at(qp)[0] - shape.normal_at(qm)[0])
        W[:, j] = T.T @ dnu / (2 * step)
    return W


# ---------------------------------------------------------------------------
# quadrature grids


@dataclass(frozen=True)
class QuadratureGrid:
    hypersurface: Hypersurface
    ambient: object
    resolution: int
    angles: np.ndarray
    omega: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    shape: np.ndarray
    kappa: np.ndarray
    H: np.ndarray
    H_f: np.ndarray
    area_factor: np.ndarray
    f: np.ndarray
    dnu_f: np.ndarray

    def __len__(self):
        return len(self.weights)

    @property
    def n(self):
        return self.ambient.n

    @property
    def measure(self):
        """Per-node unweighted area weights ``w_i J_i``."""
        return self.weights * self.area_factor

    def integrate(self, values):
        return float(np.sum(self.measure * np.asarray(values, dtype=float)))

    def shape_asymmetry(self):
        return float(np.max(np.abs(self.shape - np.swapaxes(self.shape, 1, 2))))

    def node(self, i):
        return NodeGeometry(self.x[i], self.normal[i], self.shape[i], self.kappa[i],
                            float(self.H[i]), float(self.H_f[i]), float(self.area_factor[i]),
                            float(self.f[i]), float(self.dnu_f[i]))

    def to_csv(self, path):
        n = self.n
        head = ([f"theta{i + 1}" for i in range(n - 1)] + [f"x{i + 1}" for i in range(n)]
                + ["H", "H_f", "f", "dsigma"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for i in range(len(self)):
                w.writerow([repr(float(v)) for v in self.angles[i]]
                           + [repr(float(v)) for v in self.x[i]]
                           + [repr(float(self.H[i])), repr(float(self.H_f[i])),
                              repr(float(self.f[i])), repr(float(self.measure[i]))])


def build_quadrature(hyp, ambient, resolution=24):
    angles, omega, weights = sphere_nodes(ambient.n, resolution)
    g = _geometry_batch(hyp, ambient, omega)
    return QuadratureGrid(hyp, ambient, resolution, angles, omega, weights, **g)


def area(grid):
    return grid.integrate(np.ones(len(grid)))


def weighted_area(grid):
    """``|boundary|_f = sum w_i J_i exp(-f_i)``."""
    return grid.integrate(np.exp(-grid.f))


def weighted_enclosed_volume(hyp, ambient, radial_resolution=48, resolution=24):
    """``|Omega|_f`` by nested Gauss quadrature along rays from the center."""
    _check_compatible(hyp, ambient)
    n = ambient.n
    x, w = np.polynomial.legendre.leggauss(radial_resolution)
    s, ws = 0.5 * (x + 1.0), 0.5 * w
    if hyp.kind == "coordinate_sphere":
        from .measures import sphere_area
        r0 = hyp.radius
        t = r0 * s
        fr = ambient.weight.radial_profile(t)[0]
        hr = ambient.profile.h(t)
        return float(sphere_area(n - 1) * r0 * np.sum(ws * np.exp(-fr) * hr ** (n - 1)))
    shape = hyp.shape
    _, omega, wo = sphere_nodes(n, resolution)
    rho = shape.rho(omega)
    y = shape.center + (rho[:, None, None] * s[None, :, None]) * omega[:, None, :]
    fv = ambient.f(y.reshape(-1, n)).reshape(len(omega), len(s))
    radial = np.sum(ws[None] * np.exp(-fv) * (rho[:, None] * s[None]) ** (n - 1), axis=1) * rho
    return float(np.sum(wo * radial))
