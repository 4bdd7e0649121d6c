"""Radial weighted Dirichlet problem, the weighted Reilly identity and the
Heintze-Karcher inequality chain."""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, HypothesisViolation, UnsupportedError
from .hypersurface import Sphere, build_quadrature, coordinate_sphere, radial_graph
from .measures import sphere_area

GAUSS_NODES = 48


def _radial_data(ambient):
    """``(h, h', h'', f, f', f'')`` as functions of the radius."""
    prof = ambient.weight.radial_profile
    if prof is None:
        raise UnsupportedError("the Dirichlet solver needs a radial weight")
    if ambient.model == "flat":
        return (lambda r: np.asarray(r, float), lambda r: np.ones_like(np.asarray(r, float)),
                lambda r: np.zeros_like(np.asarray(r, float)), prof)
    if ambient.model == "radial_warped":
        p = ambient.profile
        return p.h, p.dh, p.d2h, prof
    raise UnsupportedError("the Dirichlet solver needs a flat or warped ambient")


@dataclass
class RadialSolution:
    """Solution of ``Delta_f u = 1`` on the ball of radius ``rho``, ``u(rho) = 0``."""
    ambient: object
    rho: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    nodes: int

    def _weights(self, r):
        h, _, _, prof = _radial_data(self.ambient)
        return h(r) ** (self.ambient.n - 1) * np.exp(-prof(r)[0])

    def flux(self, r):
        """``u'(r) = (1/w(r)) int_0^r w``, with ``w = h^{n-1} e^{-f}``, evaluated stably."""
        r = np.atleast_1d(np.asarray(r, float))
        x, wq = np.polynomial.legendre.leggauss(self.nodes)
        s, ws = 0.5 * (x + 1.0), 0.5 * wq
        h, _, _, prof = _radial_data(self.ambient)
        n = self.ambient.n
        out = np.zeros_like(r)
        pos = r > 0
        rr = r[pos][:, None]
        ratio = (h(rr * s) / h(rr)) ** (n - 1) * np.exp(prof(rr)[0] - prof(rr * s)[0])
        out[pos] = r[pos] * np.sum(ws * ratio, axis=1)
        return out

    def value(self, r):
        """``u(r) = -int_r^rho u'``."""
        r = np.atleast_1d(np.asarray(r, float))
        x, wq = np.polynomial.legendre.leggauss(self.nodes)
        s, ws = 0.5 * (x + 1.0), 0.5 * wq
        t = r[:, None] + (self.rho - r)[:, None] * s
        return -(self.rho - r) * np.sum(ws * self.flux(t.ravel()).reshape(t.shape), axis=1)

    def second(self, r):
        """``u''`` from the equation: ``1 - ((n-1)h'/h - f') u'``."""
        r = np.atleast_1d(np.asarray(r, float))
        h, dh, _, prof = _radial_data(self.ambient)
        n = self.ambient.n
        out = np.full_like(r, 1.0 / n)
        pos = r > 0
        rp = r[pos]
        out[pos] = 1.0 - ((n - 1) * dh(rp) / h(rp) - prof(rp)[1]) * self.flux(rp)
        return out

    def residual(self, step=1e-3, samples=101):
        """``max |Delta_f u - 1|`` on interior samples, with ``u''`` by a
        five-point finite difference of ``u'``."""
        h, dh, _, prof = _radial_data(self.ambient)
        n = self.ambient.n
        r = np.linspace(2 * step, self.rho - 2 * step, samples)
        v = [self.flux(r + k * step) for k in (-2, -1, 1, 2)]
        d2u = (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * step)
        lap = d2u + ((n - 1) * dh(r) / h(r) - prof(r)[1]) * self.flux(r)
        return float(np.max(np.abs(lap - 1.0)))


def solve_radial_poisson(ambient, rho, samples=201, nodes=GAUSS_NODES):
    """Solve ``u'' + ((n-1)h'/h - f')u' = 1``, ``u'(0) = 0``, ``u(rho) = 0``.

    The equation is first order in ``u'``: ``(w u')' = w`` with
    ``w = h^{n-1} e^{-f}``, so ``u'`` and then ``u`` follow from two Gauss
    quadratures; the scaled form ``r int_0^1 w(rs)/w(r) ds`` is regular at
    the center.
    """
    rho = float(rho)
    if not rho > 0:
        raise DomainError("ball radius must be positive")
    _radial_data(ambient)
    sol = RadialSolution(ambient, rho, np.linspace(0.0, rho, samples), None, None, nodes)
    sol.du = sol.flux(sol.r)
    sol.u = sol.value(sol.r)
    return sol


def _ball_grid(ambient, rho, resolution):
    if ambient.model == "radial_warped":
        return build_quadrature(coordinate_sphere(rho), ambient, resolution)
    return build_quadrature(radial_graph(Sphere(np.zeros(ambient.n), rho)), ambient, resolution)


def _interior_integral(sol, integrand):
    """``int_B F(r) dmu`` for a radial integrand over the ball."""
    n = sol.ambient.n
    x, wq = np.polynomial.legendre.leggauss(sol.nodes)
    # two panels keep the r^{n-1} factor and the weight both well resolved
    total = 0.0
    for lo, hi in ((0.0, 0.5 * sol.rho), (0.5 * sol.rho, sol.rho)):
        r = lo + (hi - lo) * 0.5 * (x + 1.0)
        total += 0.5 * (hi - lo) * np.sum(wq * integrand(r) * sol._weights(r))
    return float(sphere_area(n - 1) * total)


def _interior_fields(sol, r):
    h, dh, d2h, prof = _radial_data(sol.ambient)
    n = sol.ambient.n
    du = sol.flux(r)
    d2u = sol.second(r)
    _, f1, f2 = prof(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        tang = np.where(r > 0, du * dh(r) / h(r), 1.0 / n)
        ric_f = np.where(r > 0, -(n - 1) * d2h(r) / h(r), 0.0) + f2
    hess2 = d2u ** 2 + (n - 1) * tang ** 2
    lap = d2u + (n - 1) * tang
    lap_f = lap - f1 * du
    return {"du": du, "d2u": d2u, "hess2": hess2, "lap": lap, "lap_f": lap_f,
            "ric_f": ric_f, "df_du": f1 * du}


def _boundary_fields(sol, grid):
    """Boundary data at each node of the sphere grid: ``u_nu``, ``z``,
    tangential gradient of ``z`` and ``Delta_{f,Sigma} z``."""
    n = grid.n
    rho = sol.rho
    du = float(sol.flux(np.array([rho]))[0])
    d2u = float(sol.second(np.array([rho]))[0])
    z = np.full(len(grid), float(sol.value(np.array([rho]))[0]))
    radial = grid.omega
    grad_u = du * radial
    u_nu = np.sum(grad_u * grid.normal, axis=1)
    T = grid.tangent
    grad_z = np.einsum("nia,ni->na", T, grad_u)
    # restriction formula: Delta_Sigma z = Delta u - Hess u(nu, nu) - H u_nu
    h, dh, _, _ = _radial_data(sol.ambient)
    lap_u = d2u + (n - 1) * du * dh(rho) / h(rho)
    nu_r = np.sum(grid.normal * radial, axis=1)
    hess_nn = d2u * nu_r ** 2 + du * dh(rho) / h(rho) * (1.0 - nu_r ** 2)
    lap_sigma = lap_u - hess_nn - grid.H * u_nu
    grad_f_t = np.einsum("nia,ni->na", T, grid.ambient.grad_f(grid.x))
    lap_f_sigma = lap_sigma - np.sum(grad_f_t * grad_z, axis=1)
    h_form = np.einsum("na,nab,nb->n", grad_z, grid.shape, grad_z)
    return {"u_nu": u_nu, "z": z, "lap_f_sigma": lap_f_sigma, "h_form": h_form}


def reilly_residual(sol, resolution=16):
    """Six terms of the weighted Reilly identity for the Dirichlet solution and
    ``LHS - RHS``.  Terms: ``int (Delta_f u)^2``, ``int |Hess u|^2``,
    ``int Ric_f(grad u, grad u)``, ``2 int u_nu Delta_{f,Sigma} z``,
    ``int H_f u_nu^2`` and ``int h(grad_Sigma z, grad_Sigma z)``."""
    def fld(key):
        return lambda r: _interior_fields(sol, r)[key]
    t1 = _interior_integral(sol, lambda r: fld("lap_f")(r) ** 2)
    t2 = _interior_integral(sol, fld("hess2"))
    t3 = _interior_integral(sol, lambda r: _interior_fields(sol, r)["ric_f"] * sol.flux(r) ** 2)
    grid = _ball_grid(sol.ambient, sol.rho, resolution)
    b = _boundary_fields(sol, grid)
    wf = np.exp(-grid.f)
    t4 = 2.0 * grid.integrate(b["u_nu"] * b["lap_f_sigma"] * wf)
    t5 = grid.integrate(grid.H_f * b["u_nu"] ** 2 * wf)
    t6 = grid.integrate(b["h_form"] * wf)
    terms = [t1, t2, t3, t4, t5, t6]
    residual = t1 - t2 - t3 - t4 - t5 - t6
    scale = max(abs(t) for t in terms)
    return {"terms": terms, "residual": float(residual),
            "relative_residual": float(abs(residual) / scale) if scale else 0.0,
            "names": ["(Delta_f u)^2", "|Hess u|^2", "Ric_f(grad u, grad u)",
                      "2 u_nu Delta_f_Sigma z", "H_f u_nu^2", "h(grad z, grad z)"]}


def hk_chain_check(sol, m=None, mode="m", resolution=16, samples=201):
    """Each inequality of the Heintze-Karcher derivation, as slacks (>= 0 expected).

    ``mode='m'`` follows the ``Ric_f^m`` chain with constant ``m``; ``mode='f'``
    drops the Hessian term and uses ``Ric_f >= 0``.
    """
    amb = sol.ambient
    n = amb.n
    grid = _ball_grid(amb, sol.rho, resolution)
    if np.any(grid.H_f <= 0):
        raise HypothesisViolation("H_f_positive", "Heintze-Karcher chain needs H_f > 0")
    b = _boundary_fields(sol, grid)
    wf = np.exp(-grid.f)
    M = _interior_integral(sol, lambda r: np.ones_like(r))
    flux = grid.integrate(b["u_nu"] * wf)
    hu2 = grid.integrate(grid.H_f * b["u_nu"] ** 2 * wf)
    inv = grid.integrate(wf / grid.H_f)
    out = {"mode": mode, "weighted_volume": M, "boundary_flux": flux,
           "int_H_f_unu2": hu2, "int_inv_H_f": inv}
    if mode == "m":
        if m is None or m < n:
            raise ConfigurationError("mode m needs m >= n")
        if m == n and not amb.weight.is_constant:
            raise ConfigurationError("m = n requires a constant weight")
        r = np.linspace(0.0, sol.rho, samples)
        fl = _interior_fields(sol, r)
        cross = 0.0 if m == n else fl["df_du"] ** 2 / (m - n)
        point = fl["hess2"] - (fl["lap_f"] ** 2 / m - cross)
        out["hess_pointwise_min"] = float(np.min(point))
        out["reilly_bound"] = float((1 - 1 / m) * M - hu2)
        out["final"] = float(inv - m / (m - 1) * M)
    elif mode == "f":
        out["reilly_bound"] = float(M - hu2)
        out["final"] = float(inv - M)
    else:
        raise DomainError(f"unknown chain mode {mode!r}")
    out["cauchy_schwarz"] = float(hu2 * inv - flux ** 2)
    out["flux_identity"] = float(flux - M)
    keys = [k for k in ("hess_pointwise_min", "reilly_bound", "cauchy_schwarz", "final") if k in out]
    out["all_hold"] = bool(all(out[k] >= -1e-8 * max(1.0, abs(M)) for k in keys))
    return out
