"""Scalar fields on regions of C^n and sampled plurisubharmonicity checks.

Points are real interleaved arrays ``(N, 2n)`` as in :mod:`pshlab.geometry`.
Multiplication by ``i`` acts on each coordinate pair as (x, y) -> (-y, x).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import NonFinite, RegionViolation
from .geometry import BoundedDomain, sample_boundary, sample_interior, to_complex


def everywhere(p):
    return np.ones(len(np.atleast_2d(p)), dtype=bool)


@dataclass(frozen=True)
class ScalarField:
    """Extended-real function with the region it may be evaluated on."""

    eval: Callable[[np.ndarray], np.ndarray]
    region: Callable[[np.ndarray], np.ndarray]
    label: str
    n: int
    # optional analytic modulus of continuity r -> omega(r) on the region
    modulus: Optional[Callable] = None

    def __call__(self, points, check: bool = True) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if check:
            ok = self.region(p)
            if not np.all(ok):
                raise RegionViolation(f"{self.label}: {int(np.sum(~ok))} point(s) outside region")
        return np.asarray(self.eval(p), dtype=float)


def times_i(v):
    """Multiply interleaved real vectors by the imaginary unit."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


# ----------------------------------------------------------------------------
# simple fields


def constant_field(n: int, k: float = 1.0, region=everywhere) -> ScalarField:
    return ScalarField(lambda p: np.full(len(p), float(k)), region, f"const({k:g})", n,
                       modulus=lambda r: np.zeros_like(np.asarray(r, dtype=float)))


def norm_squared_field(n: int, region=everywhere, center=None,
                       radius_bound: Optional[float] = None) -> ScalarField:
    """|z - center|^2; with ``radius_bound`` R >= |z - center| on the region it
    carries the modulus 2 R r + r^2."""
    c = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)
    mod = None
    if radius_bound is not None:
        R = float(radius_bound)
        mod = lambda r: 2 * R * np.asarray(r, dtype=float) + np.asarray(r, dtype=float) ** 2
    return ScalarField(lambda p: np.sum((p - c) ** 2, axis=1), region, "|z|^2", n, modulus=mod)


def real_part_field(n: int, k: int = 0, region=everywhere) -> ScalarField:
    return ScalarField(lambda p: p[:, 2 * k].copy(), region, f"Re z{k + 1}", n,
                       modulus=lambda r: np.asarray(r, dtype=float))


TEST_FIELDS = ("const", "re_z1", "norm2")


def catalog_field(name: str, domain: BoundedDomain, k: float = 1.0) -> ScalarField:
    """Named test field on a domain, with its analytic modulus attached."""
    n = domain.dimension
    if name == "const":
        return constant_field(n, k)
    if name == "re_z1":
        return real_part_field(n, 0)
    if name == "norm2":
        lo, hi = (np.asarray(b, dtype=float) for b in domain.bbox)
        R = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        return norm_squared_field(n, radius_bound=R)
    raise ValueError(f"unknown test field {name!r}; known: {TEST_FIELDS}")


def log_modulus_field(n: int, k: int = 0) -> ScalarField:
    def ev(p):
        with np.errstate(divide="ignore"):
            return np.log(np.hypot(p[:, 2 * k], p[:, 2 * k + 1]))
    return ScalarField(ev, everywhere, f"log|z{k + 1}|", n)


def neg_log_distance_field(domain: BoundedDomain) -> ScalarField:
    """-log delta(z): plurisubharmonic exactly when the domain is pseudoconvex."""
    return ScalarField(lambda p: -np.log(domain.raw_distance(p)), domain.contains,
                       f"-log delta[{domain.name}]", domain.dimension)


def max_field(fields: Sequence[ScalarField], label: Optional[str] = None) -> ScalarField:
    """Pointwise max; -inf is the identity, and the region is the intersection."""
    fields = list(fields)

    def ev(p):
        return np.max(np.stack([f.eval(p) for f in fields]), axis=0)

    def reg(p):
        ok = np.ones(len(p), dtype=bool)
        for f in fields:
            ok &= f.region(p)
        return ok

    return ScalarField(ev, reg, label or "max(" + ",".join(f.label for f in fields) + ")",
                       fields[0].n)


# ----------------------------------------------------------------------------
# circle means


def _circle_nodes(center, direction, radius, nodes):
    th = 2 * np.pi * np.arange(nodes) / nodes
    d = np.asarray(direction, dtype=float)
    return (center[..., None, :] + np.asarray(radius)[..., None, None]
            * (np.cos(th)[:, None] * d[..., None, :] + np.sin(th)[:, None] * times_i(d)[..., None, :]))


def circle_means(u: ScalarField, centers, directions, radii, nodes: int = 64) -> np.ndarray:
    """Trapezoidal means of u over the circles center + r e^{i theta} direction.

    ``centers`` and ``directions`` are ``(M, 2n)``, ``radii`` is ``(M,)``;
    directions are unit vectors. A circle with any -inf node has mean -inf.
    """
    if nodes < 16:
        raise ValueError("circle means need at least 16 nodes")
    c = np.atleast_2d(np.asarray(centers, dtype=float))
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    r = np.broadcast_to(np.asarray(radii, dtype=float), (len(c),))
    pts = _circle_nodes(c, d, r, nodes).reshape(-1, c.shape[1])
    vals = u(pts).reshape(len(c), nodes)
    with np.errstate(invalid="ignore"):
        m = np.mean(vals, axis=1)
    m[np.any(vals == -np.inf, axis=1)] = -np.inf
    return m


def circle_mean(u: ScalarField, center, direction, radius: float, nodes: int = 64) -> float:
    d = np.asarray(direction)
    if np.iscomplexobj(d):
        d = np.ascontiguousarray(d).view(float)
    d = d / np.linalg.norm(d)
    return float(circle_means(u, np.atleast_2d(center), d[None], [radius], nodes)[0])


def random_complex_directions(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((m, 2 * n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_psh(u: ScalarField, sample_points, directions: int = 4,
              radii: Sequence[float] = (1e-3, 1e-2), tol: Optional[float] = None,
              rng: Optional[np.random.Generator] = None, nodes: int = 64,
              skip_outside: bool = False) -> dict:
    """Sub-mean-value test on sampled circles.

    ``radii`` is either a list of absolute radii used at every point, or a
    2-d array of per-point radii. The default tolerance is
    ``1e-9 (1 + max |u|)`` over the sampled centers. With ``skip_outside``
    circles leaving the region are dropped and counted instead of raising.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    R = np.asarray(radii, dtype=float)
    if R.ndim == 1:
        R = np.broadcast_to(R, (len(pts), len(R)))
    vals = u(pts)
    finite = np.isfinite(vals)
    scale = float(np.max(np.abs(vals[finite]))) if finite.any() else 0.0
    tol = 1e-9 * (1.0 + scale) if tol is None else tol
    dirs = random_complex_directions(u.n, len(pts) * directions, rng).reshape(
        len(pts), directions, -1)
    C = np.repeat(pts[:, None, None, :], directions, 1).repeat(R.shape[1], 2)
    D = np.repeat(dirs[:, :, None, :], R.shape[1], 2)
    RR = np.broadcast_to(R[:, None, :], C.shape[:3])
    V = np.broadcast_to(vals[:, None, None], C.shape[:3])
    C, D, RR, V = (a.reshape(-1, *a.shape[3:]) for a in (C, D, RR, V))
    skipped = 0
    if skip_outside:
        ring = _circle_nodes(C, D, RR, nodes)
        inside = u.region(ring.reshape(-1, C.shape[1])).reshape(len(C), nodes).all(axis=1)
        skipped = int(np.sum(~inside))
        C, D, RR, V = C[inside], D[inside], RR[inside], V[inside]
    means = circle_means(u, C, D, RR, nodes) if len(C) else np.zeros(0)
    with np.errstate(invalid="ignore"):
        defect = np.where(V == -np.inf, np.inf, means - V)
    bad = defect < -tol
    witnesses = [{"center": C[i].tolist(), "direction": D[i].tolist(), "radius": float(RR[i]),
                  "defect": float(defect[i])} for i in np.flatnonzero(bad)[:20]]
    return {"op": "psh.check", "field": u.label, "verdict": bool(not bad.any()),
            "worst_defect": float(defect.min()) if len(defect) else None, "tol": tol,
            "circles": int(len(defect)), "skipped": skipped, "violations": int(bad.sum()),
            "witnesses": witnesses}


# ----------------------------------------------------------------------------
# Levi form


@dataclass(frozen=True)
class LeviReport:
    point: np.ndarray
    hessian: np.ndarray
    min_eigenvalue: float
    step: float
    asymmetry: float

    def to_dict(self):
        return {"point": self.point.tolist(), "min_eigenvalue": self.min_eigenvalue,
                "step": self.step, "asymmetry": self.asymmetry,
                "hessian_re": self.hessian.real.tolist(), "hessian_im": self.hessian.imag.tolist()}


def _stencil(point, h):
    d = point.size
    E = np.eye(d) * h
    pts = [point]
    for a in range(d):
        pts += [point + E[a], point - E[a]]
    for a in range(d):
        for b in range(a + 1, d):
            pts += [point + E[a] + E[b], point + E[a] - E[b],
                    point - E[a] + E[b], point - E[a] - E[b]]
    return np.array(pts)


def real_hessian_from_stencil(vals, d, h):
    Hr = np.empty((d, d))
    f0 = vals[0]
    for a in range(d):
        Hr[a, a] = (vals[1 + 2 * a] - 2 * f0 + vals[2 + 2 * a]) / (h * h)
    k = 1 + 2 * d
    for a in range(d):
        for b in range(a + 1, d):
            pp, pm, mp, mm = vals[k:k + 4]
            Hr[a, b] = Hr[b, a] = (pp - pm - mp + mm) / (4 * h * h)
            k += 4
    return Hr


def complex_hessian(Hr):
    """d^2 u / dz_j dzbar_k from the real Hessian in interleaved coordinates."""
    xx = Hr[0::2, 0::2]
    yy = Hr[1::2, 1::2]
    xy = Hr[0::2, 1::2]
    yx = Hr[1::2, 0::2]
    return 0.25 * ((xx + yy) + 1j * (xy - yx))


def levi_form(u: ScalarField, point, step: float = 1e-3) -> LeviReport:
    """Central-difference complex Hessian and its smallest eigenvalue.

    The convention makes the complex Hessian of |z|^2 the identity, so
    ``dd^c u >= c dd^c |z|^2`` reads ``min_eigenvalue >= c``.
    """
    p = np.asarray(point, dtype=float).reshape(-1)
    h = float(step)
    pts = _stencil(p, h)
    if not np.all(u.region(pts)):
        raise RegionViolation(f"{u.label}: Levi stencil of step {h:g} leaves the region")
    vals = u(pts, check=False)
    if not np.all(np.isfinite(vals)):
        raise NonFinite(f"{u.label}: non-finite value on the Levi stencil")
    Hc = complex_hessian(real_hessian_from_stencil(vals, p.size, h))
    asym = float(np.max(np.abs(Hc - Hc.conj().T))) if Hc.size else 0.0
    Hs = 0.5 * (Hc + Hc.conj().T)
    lam = float(np.linalg.eigvalsh(Hs)[0])
    return LeviReport(point=p, hessian=Hs, min_eigenvalue=lam, step=h, asymmetry=asym)


def levi_convergence(u: ScalarField, point, exact: np.ndarray,
                     steps: Sequence[float] = (1e-2, 5e-3, 2.5e-3)) -> dict:
    """Error of the finite-difference complex Hessian against ``exact`` across steps.

    A second-order scheme shows successive error ratios near 4.
    """
    errs = [float(np.max(np.abs(levi_form(u, point, h).hessian - exact))) for h in steps]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = [errs[i] / errs[i + 1] if errs[i + 1] > 0 else float("inf")
                  for i in range(len(errs) - 1)]
    ok = all(4 / 1.5 <= r <= 4 * 1.5 for r in ratios)
    return {"steps": list(steps), "errors": errs, "ratios": ratios, "second_order": ok}


# ----------------------------------------------------------------------------
# modulus of continuity


@dataclass(frozen=True)
class ModulusTable:
    """Non-decreasing empirical modulus: omega(r) = max |u(p) - u(q)| over |p - q| <= r."""

    r: np.ndarray
    omega: np.ndarray

    def __call__(self, radius):
        """Value at the smallest tabulated radius >= ``radius`` (monotone overestimate)."""
        i = np.searchsorted(self.r, np.asarray(radius, dtype=float), side="left")
        i = np.minimum(i, len(self.r) - 1)
        return self.omega[i]


def modulus_of_continuity(u: ScalarField, domain: BoundedDomain, pair_samples: int = 20000,
                          rng: Optional[np.random.Generator] = None, bins: int = 80,
                          r_min: Optional[float] = None) -> ModulusTable:
    """Running-max envelope of |u(p) - u(q)| against |p - q| over sampled pairs.

    Half the pairs are uniform over the closure; the rest are near pairs at
    tabulated distances, in random and coordinate-aligned directions.
    """
    if pair_samples < 1000:
        raise ValueError("pair_samples must be at least 1000")
    rng = np.random.default_rng(0) if rng is None else rng
    diam = domain.diameter
    r_min = 1e-7 * diam if r_min is None else r_min
    grid = np.geomspace(r_min, diam, bins)
    half = pair_samples // 2
    cl = np.concatenate([sample_interior(domain, half, rng),
                         sample_boundary(domain, max(half // 4, 1), rng)])
    perm = rng.permutation(len(cl))
    P, Q = cl, cl[perm]
    # near pairs
    m = pair_samples - half
    base = sample_interior(domain, m, rng)
    dirs = random_complex_directions(domain.dimension, m, rng)
    axis = rng.integers(0, domain.real_dim, m)
    aligned = rng.random(m) < 0.5
    dirs[aligned] = 0.0
    dirs[aligned, axis[aligned]] = rng.choice([-1.0, 1.0], int(aligned.sum()))
    s = grid[rng.integers(0, bins, m)]
    near = base + s[:, None] * dirs
    ok = domain.contains(near)
    P = np.concatenate([P, base[ok]])
    Q = np.concatenate([Q, near[ok]])
    dist = np.linalg.norm(P - Q, axis=1)
    du = np.abs(u(P) - u(Q))
    order = np.argsort(dist, kind="stable")
    dist, du = dist[order], np.maximum.accumulate(du[order])
    idx = np.searchsorted(dist, grid * (1 + 1e-12), side="right") - 1
    om = np.where(idx >= 0, du[np.maximum(idx, 0)], 0.0)
    return ModulusTable(r=grid, omega=np.maximum.accumulate(om))


# ----------------------------------------------------------------------------
# mollification

MOLLIFIER_NODES = 2 ** 12


def _bump(rho):
    out = np.zeros_like(rho)
    ok = rho < 1
    out[ok] = np.exp(-1.0 / (1.0 - rho[ok] ** 2))
    return out


@lru_cache(maxsize=8)
def mollifier_nodes(dim: int, nodes: int = MOLLIFIER_NODES):
    """Antithetic scrambled-Sobol nodes in the unit ball with normalized bump weights."""
    sob = qmc.Sobol(d=dim, scramble=True, seed=12345)
    pts = []
    need = nodes // 2
    while sum(len(p) for p in pts) < need:
        x = 2 * sob.random(2 ** int(np.ceil(np.log2(need * 2)))) - 1
        pts.append(x[np.linalg.norm(x, axis=1) < 1])
    x = np.concatenate(pts)[:need]
    x = np.concatenate([x, -x])
    w = _bump(np.linalg.norm(x, axis=1))
    w /= w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def kernel_second_moment(dim: int) -> float:
    """sum_i w_i |x_i|^2, so that mollifying |z|^2 at radius r adds this times r^2."""
    x, w = mollifier_nodes(dim)
    return float(np.sum(w * np.sum(x * x, axis=1)))


def mollify(u: ScalarField, radius: float, chunk: int = 64) -> ScalarField:
    """Weighted quasi-Monte-Carlo average of u over balls of the given radius.

    The new region consists of points whose node ball stays in u's region.
    """
    if radius <= 0:
        raise ValueError("mollifier radius must be positive")
    x, w = mollifier_nodes(2 * u.n)
    off = radius * x

    def region(p):
        p = np.atleast_2d(p)
        out = np.empty(len(p), dtype=bool)
        for s in range(0, len(p), chunk):
            q = (p[s:s + chunk, None, :] + off[None]).reshape(-1, p.shape[1])
            out[s:s + chunk] = u.region(q).reshape(-1, len(off)).all(axis=1)
        return out

    def ev(p):
        p = np.atleast_2d(p)
        out = np.empty(len(p))
        for s in range(0, len(p), chunk):
            q = (p[s:s + chunk, None, :] + off[None]).reshape(-1, p.shape[1])
            vals = u.eval(q).reshape(-1, len(off))
            with np.errstate(invalid="ignore"):
                out[s:s + chunk] = vals @ w
        return out

    return ScalarField(ev, region, f"mollify({u.label},{radius:g})", u.n)


def mollify_error_sigma(u: ScalarField, p, radius: float) -> np.ndarray:
    """Sampling standard error of the mollified value, sqrt(sum w_i^2 (u_i - mean)^2)."""
    x, w = mollifier_nodes(2 * u.n)
    p = np.atleast_2d(p)
    q = (p[:, None, :] + radius * x[None]).reshape(-1, p.shape[1])
    vals = u.eval(q).reshape(len(p), -1)
    mean = vals @ w
    return np.sqrt(((vals - mean[:, None]) ** 2) @ (w * w))
