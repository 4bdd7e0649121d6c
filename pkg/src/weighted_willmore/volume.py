"""Weighted tube volumes, ball volumes and their asymptotic ratios."""
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .comparison import cut_times
from .errors import ConfigurationError, DomainError, UnsupportedError
from .hypersurface import sphere_nodes, weighted_enclosed_volume
from .measures import ball_volume, sphere_area

RADIAL_NODES = 24
RATIO_KINDS = ("RV_f", "RVbar_f", "AVR_f_m", "AVR")


def default_schedule(gaussian=False, count=7):
    """Geometric radii ``10 * 2**j`` (or ``60 * 2**(j - 6)`` for fast-decaying weights)."""
    j = np.arange(count)
    base = 60.0 / 2 ** (count - 1) if gaussian else 10.0
    return base * 2.0 ** j


def normalizer(kind, r, n, a=0.0, k=0.0, m=None):
    """Model volume growth.

    ``kind`` is one of ``'exp'`` (``n|B^n| int_0^r e^{at} t^{n-1} dt``),
    ``'n4k'`` (``|B^{n+4k}| r^{n+4k}``), ``'m'`` (``|B^m| r^m``) or ``'n'``.
    """
    r = float(r)
    if r < 0:
        raise DomainError("normalizer radius must be non-negative")
    if kind == "exp":
        if a < 0:
            raise DomainError("a must be non-negative")
        if a == 0:
            return ball_volume(n) * r ** n
        if a * r > 700:
            raise DomainError("a * r too large for double precision")
        val, _ = quad(lambda t: math.exp(a * t) * t ** (n - 1), 0.0, r,
                      epsabs=0.0, epsrel=1e-13, limit=200)
        return n * ball_volume(n) * val
    if kind == "n4k":
        if k < 0:
            raise DomainError("k must be non-negative")
        return ball_volume(n + 4 * k) * r ** (n + 4 * k)
    if kind == "m":
        if m is None or m < n:
            raise DomainError("kind 'm' needs m >= n")
        return ball_volume(m) * r ** m
    if kind == "n":
        return ball_volume(n) * r ** n
    raise DomainError(f"unknown normalizer kind {kind!r}")


def _panels(upper):
    """Geometric panel breakpoints 0, 1, 2, 4, ... covering ``[0, upper]``."""
    pts = [0.0, 1.0]
    while pts[-1] < upper:
        pts.append(2 * pts[-1])
    return np.array(pts)


def _radial_rule(lower, upper, breaks):
    """Composite Gauss rule on ``[lower, upper]`` (arrays) split at ``breaks``.
    Returns nodes and weights of shape ``(..., panels * RADIAL_NODES)``."""
    x, w = np.polynomial.legendre.leggauss(RADIAL_NODES)
    lo = np.clip(breaks[:-1], lower[..., None], upper[..., None])
    hi = np.clip(breaks[1:], lower[..., None], upper[..., None])
    half = 0.5 * (hi - lo)
    t = (lo + half)[..., None] + half[..., None] * x
    wt = half[..., None] * w
    shape = t.shape[:-2] + (-1,)
    return t.reshape(shape), wt.reshape(shape)


class TubeIntegrator:
    """Integrates ``A_f`` over the normal exponential map of a boundary grid.

    ``Vol_f{d(x, Omega) < R} = |Omega|_f + sum_i w_i J_i int_0^{min(R, tau_i)} A_f dr``.
    """

    def __init__(self, grid, r_max=None, enclosed=None):
        self.grid = grid
        self.ambient = grid.ambient
        hyp = grid.hypersurface
        if self.ambient.model == "product_cylinder":
            raise UnsupportedError("tube volumes need a flat or warped ambient")
        self.enclosed = (weighted_enclosed_volume(hyp, self.ambient, resolution=grid.resolution)
                         if enclosed is None else float(enclosed))
        kap = grid.kappa
        with np.errstate(divide="ignore"):
            focal = np.where(kap < 0, -1.0 / kap, np.inf).min(axis=1)
        self.focal = focal
        if hyp.kind == "radial_graph" and not hyp.shape.is_convex():
            self.tau = np.minimum(cut_times(grid, r_max or 1e3), focal)
        else:
            self.tau = focal

    def density(self, t):
        """``A_f`` at distances ``t`` (shape ``(N, S)``) along every node's ray."""
        g = self.grid
        n = g.n
        if g.hypersurface.kind == "coordinate_sphere":
            r0 = g.hypersurface.radius
            prof = self.ambient.profile
            rad = r0 + t
            fvals = self.ambient.weight.radial_profile(rad)[0]
            return (prof.h(rad) / prof.h(r0)) ** (n - 1) * np.exp(-fvals)
        A = np.prod(1.0 + g.kappa[:, None, :] * t[..., None], axis=-1)
        pts = g.x[:, None, :] + t[..., None] * g.normal[:, None, :]
        fvals = self.ambient.f(pts.reshape(-1, n)).reshape(t.shape)
        return np.where(A > 0, A, 0.0) * np.exp(-fvals)

    def shell(self, R):
        """Weighted volume of the tube minus the body."""
        R = float(R)
        if R < 0:
            raise DomainError("tube radius must be non-negative")
        if R == 0:
            return 0.0
        upper = np.minimum(R, self.tau)
        t, wt = _radial_rule(np.zeros(len(upper)), upper, _panels(R))
        inner = np.sum(wt * self.density(t), axis=1)
        return float(np.sum(self.grid.measure * inner))

    def volume(self, R):
        return self.enclosed + self.shell(R)


def tube_volume_f(grid, R):
    return TubeIntegrator(grid, r_max=max(float(R), 1.0)).volume(R)


def ball_volume_f(ambient, center, R, weighted=True, resolution=24):
    """``|B(p, R)|_f`` (or the unweighted volume) by polar quadrature about ``p``."""
    n = ambient.n
    R = float(R)
    if R <= 0:
        return 0.0
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    breaks = _panels(R)
    if ambient.model == "radial_warped":
        if np.any(center != 0):
            raise UnsupportedError("warped ball volumes are only taken about the pole")
        t, wt = _radial_rule(np.zeros(1), np.array([R]), breaks)
        t, wt = t[0], wt[0]
        dens = ambient.profile.h(t) ** (n - 1)
        if weighted:
            dens = dens * np.exp(-ambient.weight.radial_profile(t)[0])
        return float(sphere_area(n - 1) * np.sum(wt * dens))
    if ambient.model != "flat":
        raise UnsupportedError("ball volumes need a flat or warped ambient")
    if not weighted or ambient.weight.is_constant:
        scale = 1.0 if not weighted else math.exp(-float(ambient.f(center[None])[0]))
        return scale * ball_volume(n) * R ** n
    _, omega, w = sphere_nodes(n, resolution)
    t, wt = _radial_rule(np.zeros(1), np.array([R]), breaks)
    t, wt = t[0], wt[0]
    pts = center + t[None, :, None] * omega[:, None, :]
    fvals = ambient.f(pts.reshape(-1, n)).reshape(len(omega), len(t))
    return float(np.sum(w[:, None] * wt[None, :] * t ** (n - 1) * np.exp(-fvals)))


def richardson(R, values):
    """Two-point fits of ``L + c/R`` on the last three samples.

    Returns ``(L, err, fits)`` with ``L`` the fit on the last pair and ``err``
    the change from the previous pair's fit."""
    R = np.asarray(R, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(R) < 3:
        raise DomainError("extrapolation needs at least three samples")

    def fit(i, j):
        return (R[j] * v[j] - R[i] * v[i]) / (R[j] - R[i])

    L1 = fit(-3, -2)
    L2 = fit(-2, -1)
    return float(L2), float(abs(L2 - L1)), [float(L1), float(L2)]


@dataclass
class VolumeSeries:
    kind: str
    params: dict
    R: np.ndarray
    volume: np.ndarray
    normalizer: np.ndarray
    ratio: np.ndarray
    limit: float
    error: float
    monotone_nonincreasing: bool
    verdict: str
    fits: list = field(default_factory=list)

    def as_dict(self):
        return {
            "kind": self.kind, "params": self.params,
            "samples": [{"R": float(r), "volume": float(v), "normalizer": float(d), "ratio": float(q)}
                        for r, v, d, q in zip(self.R, self.volume, self.normalizer, self.ratio)],
            "limit": self.limit, "error": self.error,
            "monotone_nonincreasing": self.monotone_nonincreasing, "verdict": self.verdict,
            "fits": self.fits,
        }

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "tube_volume", "normalizer", "ratio"])
            for r, v, d, q in zip(self.R, self.volume, self.normalizer, self.ratio):
                w.writerow([repr(float(r)), repr(float(v)), repr(float(d)), repr(float(q))])


def ratio_series(kind, schedule, grid=None, ambient=None, center=None, a=0.0, k=0.0, m=None,
                 threads=1, monotone_tol=1e-9):
    """Volume ratios along a geometric radius schedule with an extrapolated limit.

    ``RV_f`` and ``RVbar_f`` use tube volumes around the grid's body; ``AVR_f_m``
    and ``AVR`` use (weighted / unweighted) geodesic balls about ``center``.
    """
    if kind not in RATIO_KINDS:
        raise DomainError(f"unknown ratio kind {kind!r}")
    R = np.asarray(schedule, dtype=float)
    if len(R) < 6:
        raise DomainError("schedule needs at least six radii")
    if np.any(R <= 0) or np.any(np.diff(R) <= 0):
        raise DomainError("schedule must be positive and strictly increasing")
    if not np.allclose(R[1:] / R[:-1], R[1] / R[0], rtol=1e-9):
        raise DomainError("schedule must be geometric")
    ambient = ambient if ambient is not None else grid.ambient
    n = ambient.n
    if kind in ("RV_f", "RVbar_f"):
        if grid is None:
            raise ConfigurationError("tube ratios need a boundary grid")
        integ = TubeIntegrator(grid, r_max=float(R[-1]))
        volume_of = integ.volume
        nkind = "exp" if kind == "RV_f" else "n4k"
    else:
        weighted = kind == "AVR_f_m"
        if weighted and m is None:
            m = ambient.m_synthetic
        if weighted and m is None:
            raise ConfigurationError("AVR_f_m needs a synthetic dimension m")

        def volume_of(r):
            return ball_volume_f(ambient, center, r, weighted=weighted)
        nkind = "m" if weighted else "n"
    if nkind == "exp" and a * R[-1] > 700:
        raise DomainError("a * R_max must stay below 700")
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vols = np.array(list(ex.map(volume_of, R)))
    else:
        vols = np.array([volume_of(r) for r in R])
    norms = np.array([normalizer(nkind, r, n, a, k, m) for r in R])
    ratio = vols / norms
    scale = max(1.0, float(np.max(np.abs(ratio))))
    monotone = bool(np.all(np.diff(ratio) <= monotone_tol * scale))
    finite = bool(np.all(np.isfinite(ratio)))
    L, err, fits = richardson(R, ratio)
    verdict = "converged" if (monotone and finite) else "no-convergence"
    params = {"n": n, "a": a, "k": k, "m": m,
              "center": None if center is None else [float(c) for c in center]}
    return VolumeSeries(kind, params, R, vols, norms, ratio, L, err, monotone, verdict, fits)


def _mc_chunk(args):
    grid, R, lo, hi, count, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    pts = rng.uniform(lo, hi, size=(count, grid.n))
    shape = grid.hypersurface.shape
    inside = shape.contains(pts)
    hit = inside.copy()
    if R > 0:
        out = ~inside
        hit[out] = shape.distance_to_boundary(pts[out]) < R
    vals = np.where(hit, np.exp(-grid.ambient.f(pts)), 0.0)
    return float(np.sum(vals)), float(np.sum(vals * vals))


def mc_cross_check(grid, R, samples=1_000_000, seed=42, threads=1, chunk=100_000):
    """Uniform Monte-Carlo estimate of the weighted tube volume.

    Each chunk draws from its own stream spawned from ``seed``, so the result
    does not depend on ``threads``.  Returns a dict with estimate and standard error.
    """
    if grid.ambient.model != "flat" or grid.hypersurface.kind != "radial_graph":
        raise UnsupportedError("Monte-Carlo cross-check needs a flat ambient and a radial graph")
    shape = grid.hypersurface.shape
    half = float(R) + shape.rho_max
    lo, hi = shape.center - half, shape.center + half
    box = (2 * half) ** grid.n
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(grid, float(R), lo, hi, c, s) for c, s in zip(sizes, seeds)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_mc_chunk, jobs))
    else:
        parts = [_mc_chunk(j) for j in jobs]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    return {"estimate": box * mean, "stderr": box * math.sqrt(var / samples),
            "samples": int(samples), "seed": int(seed), "box_half_width": half}
