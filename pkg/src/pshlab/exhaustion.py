"""Bounded plurisubharmonic exhaustion built from inward translates of
-log(distance to the boundary).

For each eps the local functions log 1/delta(z + eps w_j) are glued with
radial bumps and a quadratic weight into v_eps; the exhaustion is

    w(z) = sup_{0 < eps <= eps0} v_eps(z) / log(1/eps) - 1,

with the sup taken over a geometric grid plus the point's own eps = delta(z).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import (AttainmentViolation, GammaTooSmall, NonSmoothPoint, OmegaRatioViolation,
                     TranslateEscapes)
from .geometry import BoundedDomain, sample_boundary, sample_interior
from .mergelyan import S1_MAX, S2_MAX, default_anchor, smoothstep
from .psh import ScalarField, _stencil, check_psh, levi_form
from .special import omega_ratio

LOG2 = math.log(2.0)


def bump_levi_bound(radius: float, inner: float = 1 / 3, outer: float = 1 / 2) -> float:
    """K with dd^c psi >= -K L dd^c|z|^2 for psi = L S((outer r - rho)/((outer - inner) r)).

    On the transition rho >= inner r; the radial complex line sees
    (g'' + g'/rho)/4 and the other directions g'/(2 rho).
    """
    s = (outer - inner) * radius
    rho_min = inner * radius
    radial = (S2_MAX + S1_MAX * s / rho_min) / (4.0 * s * s)
    across = S1_MAX / (2.0 * s * rho_min)
    return max(radial, across)


@dataclass(frozen=True)
class ExhaustionConfig:
    """Knobs of the exhaustion; ``None`` entries are derived from the domain."""

    c: float = 2.0
    eps0: Optional[float] = None
    rho: float = 0.9
    grid_floor: float = 1e-10
    gamma: Optional[float] = None
    lambda_constant: Optional[float] = None
    bump_inner: float = 1 / 3
    bump_outer: float = 1 / 2
    gamma_samples: int = 100
    gamma_eps: int = 8

    def resolve_eps0(self, domain: BoundedDomain) -> float:
        if self.eps0 is not None:
            e = float(self.eps0)
        else:
            e = domain.eps_w / self.c
        # the gain is defined on the open interval (0, eps1)
        return min(e, float(np.nextafter(domain.eps1, 0.0)))

    def eps_grid(self, eps0: float) -> np.ndarray:
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not 0 < self.grid_floor < eps0:
            raise ValueError("grid_floor must lie in (0, eps0)")
        k = int(math.floor(math.log(self.grid_floor / eps0) / math.log(self.rho)))
        g = eps0 * self.rho ** np.arange(k + 1)
        # keep the floor itself so refined grids share both endpoints
        if g[-1] > self.grid_floor * (1 + 1e-12):
            g = np.append(g, self.grid_floor)
        return g


@dataclass
class ExhaustionArtifact:
    domain: BoundedDomain
    config: ExhaustionConfig
    eps0: float
    grid: np.ndarray
    gamma: float
    lambda_constant: float
    anchor: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    directions: np.ndarray
    tree: cKDTree
    w: Optional[ScalarField] = None
    bound_records: list = field(default_factory=list)
    fitted_constants: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def gain(self):
        return self.domain.regularity.gain_fn

    def lam(self, eps):
        return self.lambda_constant * self.gain.log_ratio(eps)

    def bump_weight(self, pts, j):
        """psi_j / log(eps/f(eps)): 1 on B(x_j, inner r_j), 0 outside B(x_j, outer r_j)."""
        pts = np.atleast_2d(pts)
        return self.pair_weights(pts, np.broadcast_to(np.asarray(j), len(pts)))

    def pair_weights(self, pts, cols):
        cfg = self.config
        r = self.radii[cols]
        rho = np.linalg.norm(pts - self.centers[cols], axis=1)
        return smoothstep((cfg.bump_outer * r - rho) / ((cfg.bump_outer - cfg.bump_inner) * r))

    def pairs(self, pts):
        """(row, patch) pairs with z in the closed ball B(x_j, r_j/2)."""
        half = self.config.bump_outer * self.radii
        nb = self.tree.query_ball_point(pts, float(half.max()) * (1 + 1e-12))
        lens = np.fromiter((len(b) for b in nb), dtype=int, count=len(nb))
        if lens.sum() == 0:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        rows = np.repeat(np.arange(len(pts)), lens)
        cols = np.concatenate([np.asarray(b, dtype=int) for b in nb if len(b)])
        keep = np.linalg.norm(pts[rows] - self.centers[cols], axis=1) <= half[cols]
        return rows[keep], cols[keep]

    def translated_log(self, pts, cols, eps):
        """log 1/delta(z + eps w_j) for paired rows; eps has shape (P, E)."""
        moved = pts[:, None, :] + eps[:, :, None] * self.directions[cols][:, None, :]
        flat = moved.reshape(-1, pts.shape[1])
        inside = self.domain.contains(flat)
        if not inside.all():
            bad = flat[~inside][0]
            raise TranslateEscapes(f"{self.domain.name}: translate {bad.tolist()} leaves the domain")
        return -np.log(self.domain.raw_distance(flat)).reshape(eps.shape)

    def v_family(self, pts, eps, gamma=None):
        """v_eps(z) and the active branch (-1 for the fallback) on an (N, E) eps array."""
        gamma = self.gamma if gamma is None else gamma
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        eps = np.broadcast_to(np.asarray(eps, dtype=float), (len(pts),) + np.shape(eps)[-1:])
        q2 = np.sum((pts - self.anchor) ** 2, axis=1)[:, None]
        L = self.gain.log_ratio(eps)
        lam = self.lambda_constant * L
        best = q2 - lam
        branch = np.full(best.shape, -1, dtype=int)
        rows, cols = self.pairs(pts)
        if len(rows):
            b = self.pair_weights(pts[rows], cols)
            vals = (self.translated_log(pts[rows], cols, eps[rows]) + L[rows] * b[:, None]
                    + lam[rows] * (q2[rows] - gamma))
            # at most a handful of patches per point: fold them in one slot at a time
            first = np.r_[True, rows[1:] != rows[:-1]]
            slot = np.arange(len(rows)) - np.maximum.accumulate(np.where(first, np.arange(len(rows)), 0))
            for s in range(int(slot.max()) + 1):
                m = slot == s
                r, c, v = rows[m], cols[m], vals[m]
                win = v > best[r]
                best[r] = np.where(win, v, best[r])
                branch[r] = np.where(win, c[:, None], branch[r])
        return best, branch

    def w_family(self, pts, eps, gamma=None):
        v, branch = self.v_family(pts, eps, gamma)
        eps = np.broadcast_to(np.asarray(eps, dtype=float), v.shape)
        return v / np.log(1.0 / eps) - 1.0, branch

    def point_grid(self, pts, delta):
        """Shared grid plus the per-point insert eps = delta(z) (clipped to eps0)."""
        ins = np.minimum(delta, self.eps0)[:, None]
        return np.hstack([np.broadcast_to(self.grid, (len(pts), len(self.grid))), ins])

    def trace(self, pts, chunk: int = 256):
        """w_eps(z) over each point's eps grid: (eps, w_eps, branch), rows per point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        delta = self.domain.raw_distance(pts)
        E = self.point_grid(pts, delta)
        W = np.empty(E.shape)
        B = np.empty(E.shape, dtype=int)
        for a in range(0, len(pts), chunk):
            W[a:a + chunk], B[a:a + chunk] = self.w_family(pts[a:a + chunk], E[a:a + chunk])
        return E, W, B, delta

    def evaluate(self, pts, chunk: int = 256) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts))
        inside = self.domain.contains(pts)
        if inside.any():
            _, W, _, _ = self.trace(pts[inside], chunk)
            out[inside] = W.max(axis=1)
        return out

    def w_eps_field(self, eps: float) -> ScalarField:
        """The single member w_eps as a field on the open domain."""
        e = float(eps)

        def ev(p):
            return self.w_family(p, np.array([e]))[0][:, 0]

        return ScalarField(ev, self.domain.contains, f"w_eps[{e:.3g}]", self.domain.dimension)


def _check_omega(domain: BoundedDomain, grid: np.ndarray) -> np.ndarray:
    om = omega_ratio(domain.regularity.gain_fn, grid)
    if not np.all(om > 0):
        raise OmegaRatioViolation(f"{domain.name}: omega(eps) <= 0 on the eps grid")
    # grid is decreasing, so omega must decrease along it
    if not np.all(np.diff(om) < 0):
        k = int(np.argmax(np.diff(om) >= 0))
        raise OmegaRatioViolation(
            f"{domain.name}: omega does not decay, omega({grid[k + 1]:.3g}) = {om[k + 1]:.6g}"
            f" >= omega({grid[k]:.3g}) = {om[k]:.6g}")
    return om


def _sphere_points(art: ExhaustionArtifact, j: int, m: int, rng: np.random.Generator):
    d = art.domain.real_dim
    g = rng.standard_normal((4 * m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts = art.centers[j] + art.config.bump_outer * art.radii[j] * g
    return pts[art.domain.contains(pts)][:m]


def _gamma_requirement(art: ExhaustionArtifact, rng: np.random.Generator) -> float:
    """Smallest gamma making every patched candidate lose on its own support sphere.

    Patched candidates all carry -gamma lambda, so only the fallback
    comparison depends on gamma: P_j - gamma lam <= q2 - lam.
    """
    cfg = art.config
    sub = art.grid[np.unique(np.linspace(0, len(art.grid) - 1, cfg.gamma_eps).astype(int))]
    need = 1.0
    for j in range(len(art.centers)):
        pts = _sphere_points(art, j, cfg.gamma_samples, rng)
        if not len(pts):
            continue
        own, other = _split_candidates(art, pts, j, sub)
        q2 = np.sum((pts - art.anchor) ** 2, axis=1)[:, None]
        lam = art.lam(sub)[None, :]
        lose = own > other
        if lose.any():
            req = (own - q2 + lam) / lam
            need = max(need, float(req[lose].max()))
    return need


def _split_candidates(art: ExhaustionArtifact, pts, j: int, eps):
    """gamma-free parts P = v_j + psi_j + lam q2 of candidate j and the best other patch."""
    eps = np.broadcast_to(eps, (len(pts), len(eps)))
    q2 = np.sum((pts - art.anchor) ** 2, axis=1)[:, None]
    L = art.gain.log_ratio(eps)
    lam = art.lambda_constant * L
    own = np.full(eps.shape, -np.inf)
    other = np.full(eps.shape, -np.inf)
    rows, cols = art.pairs(pts)
    for k in np.unique(cols):
        r = rows[cols == k]
        val = (art.translated_log(pts[r], np.full(len(r), k), eps[r])
               + L[r] * art.bump_weight(pts[r], k)[:, None] + lam[r] * q2[r])
        tgt = own if k == j else other
        tgt[r] = np.maximum(tgt[r], val)
    if not np.isfinite(own).all():
        # sphere points sit on the closed ball; guard against rounding
        rr = np.flatnonzero(~np.isfinite(own[:, 0]))
        own[rr] = (art.translated_log(pts[rr], np.full(len(rr), j), eps[rr])
                   + L[rr] * art.bump_weight(pts[rr], j)[:, None] + lam[rr] * q2[rr])
    return own, other


def build_bump(art: ExhaustionArtifact, j: int, eps: float):
    """(psi_j, lambda) with psi_j = log(eps/f(eps)) S(...) supported in B(x_j, r_j/2)."""
    L = float(art.gain.log_ratio(eps))

    def ev(p):
        return L * art.bump_weight(np.atleast_2d(p), j)

    psi = ScalarField(ev, lambda p: np.ones(len(np.atleast_2d(p)), dtype=bool),
                      f"psi[{j},{eps:.3g}]", art.domain.dimension)
    return psi, art.lambda_constant * L


def v_eps_j(art: ExhaustionArtifact, j: int, eps: float) -> ScalarField:
    """log 1/delta(z + eps w_j) on the domain intersected with the closed B(x_j, r_j/2)."""
    if not 0 < eps <= art.eps0:
        raise ValueError(f"eps must lie in (0, {art.eps0:g}]")
    half = art.config.bump_outer * art.radii[j]

    def region(p):
        p = np.atleast_2d(p)
        return art.domain.contains(p) & (np.linalg.norm(p - art.centers[j], axis=1) <= half)

    def ev(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return art.translated_log(p, np.full(len(p), j), np.full((len(p), 1), eps))[:, 0]

    return ScalarField(ev, region, f"v[{j},{eps:.3g}]", art.domain.dimension)


def v_eps(art: ExhaustionArtifact, eps: float, check_gamma: bool = True,
          rng: Optional[np.random.Generator] = None) -> ScalarField:
    """max_j (v_eps_j + psi_j + lam|z|^2 - gamma lam, |z|^2 - lam)."""
    if not 0 < eps <= art.eps0:
        raise ValueError(f"eps must lie in (0, {art.eps0:g}]")
    if check_gamma:
        rng = np.random.default_rng(0) if rng is None else rng
        for j in range(len(art.centers)):
            pts = _sphere_points(art, j, art.config.gamma_samples, rng)
            if not len(pts):
                continue
            own, other = _split_candidates(art, pts, j, np.array([eps]))
            q2 = np.sum((pts - art.anchor) ** 2, axis=1)[:, None]
            lam = art.lam(eps)
            bad = own - art.gamma * lam > np.maximum(other - art.gamma * lam, q2 - lam)
            if bad.any():
                raise GammaTooSmall(f"gamma = {art.gamma:g}: patch {j} wins on its support sphere "
                                    f"at {pts[np.flatnonzero(bad[:, 0])[0]].tolist()}")
    e = float(eps)

    def ev(p):
        return art.v_family(p, np.array([e]))[0][:, 0]

    return ScalarField(ev, art.domain.contains, f"v_eps[{e:.3g}]", art.domain.dimension)


def build_exhaustion(domain: BoundedDomain, config: Optional[ExhaustionConfig] = None,
                     rng: Optional[np.random.Generator] = None) -> ExhaustionArtifact:
    config = ExhaustionConfig() if config is None else config
    rng = np.random.default_rng(0) if rng is None else rng
    if not domain.atlas:
        raise ValueError(f"{domain.name} has no boundary atlas")
    eps0 = config.resolve_eps0(domain)
    grid = config.eps_grid(eps0)
    om = _check_omega(domain, grid)
    radii = np.array([p.radius for p in domain.atlas])
    K = (config.lambda_constant if config.lambda_constant is not None else
         bump_levi_bound(float(radii.max()), config.bump_inner, config.bump_outer))
    centers = np.array([p.center for p in domain.atlas])
    art = ExhaustionArtifact(
        domain=domain, config=config, eps0=eps0, grid=grid, gamma=2.0,
        lambda_constant=float(K), anchor=default_anchor(domain), centers=centers, radii=radii,
        directions=np.array([p.direction for p in domain.atlas]), tree=cKDTree(centers))
    if config.gamma is None:
        need = _gamma_requirement(art, rng)
        gamma = 2.0
        while gamma < need:
            gamma *= 2.0
        art.gamma = 2.0 * gamma
        art.stats["gamma_required"] = need
    else:
        if not config.gamma > 1:
            raise ValueError("gamma must exceed 1")
        art.gamma = float(config.gamma)
    art.stats.update(omega_grid=(float(om[0]), float(om[-1])), grid_size=len(grid))
    art.w = ScalarField(art.evaluate, lambda p: np.ones(len(np.atleast_2d(p)), dtype=bool),
                        f"w[{domain.name}]", domain.dimension)
    return art


def lower_bound(art: ExhaustionArtifact, delta, C1: float) -> np.ndarray:
    """-log 2 / log(1/delta) - C1 omega(delta); nan where delta > eps0."""
    d = np.asarray(delta, dtype=float)
    out = np.full(d.shape, np.nan)
    m = (d > 0) & (d <= art.eps0)
    out[m] = -LOG2 / np.log(1.0 / d[m]) - C1 * omega_ratio(art.gain, d[m])
    return out


def upper_bound(art: ExhaustionArtifact, delta) -> np.ndarray:
    """log(f(eps0)/(delta + f(eps0))) / log(1/eps0); nan where delta >= eps0."""
    d = np.asarray(delta, dtype=float)
    f0 = float(art.gain(art.eps0))
    out = np.full(d.shape, np.nan)
    m = d < art.eps0
    out[m] = np.log(f0 / (d[m] + f0)) / math.log(1.0 / art.eps0)
    return out


def gain_increasing(art: ExhaustionArtifact) -> bool:
    return bool(np.all(art.gain.derivative(art.grid) > 0))


def fit_C1(art: ExhaustionArtifact, delta, w) -> float:
    """Smallest C1 making the lower bound hold at every sample with delta <= eps0."""
    d = np.asarray(delta)
    m = (d > 0) & (d <= art.eps0)
    if not m.any():
        return float("nan")
    need = (-LOG2 / np.log(1.0 / d[m]) - np.asarray(w)[m]) / omega_ratio(art.gain, d[m])
    return float(max(need.max(), 0.0))


def stable(a: float, b: float, tol: float = 0.2) -> bool:
    """a and b agree to within a relative tol (both positive and finite)."""
    if not (np.isfinite(a) and np.isfinite(b) and a > 0 and b > 0):
        return False
    return abs(a - b) <= tol * max(a, b)


def check_bounds(art: ExhaustionArtifact, points) -> dict:
    """Evaluate w, fit C1 on two halves, and test (2.2)/(2.3)-type bounds and sign."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = art.evaluate(pts)
    delta = art.domain.raw_distance(pts)
    half = len(pts) // 2
    C1_a = fit_C1(art, delta[:half], w[:half])
    C1_b = fit_C1(art, delta[half:], w[half:])
    C1 = fit_C1(art, delta, w)
    lo = lower_bound(art, delta, C1)
    up = upper_bound(art, delta)
    inc = gain_increasing(art)
    near = delta < art.eps0
    upper_ok = bool(np.all(w[near] <= up[near])) if inc else None
    art.bound_records = [(p.tolist(), float(dl), float(l), float(v), float(u))
                         for p, dl, l, v, u in zip(pts, delta, lo, w, up)]
    art.fitted_constants.update(C1=C1, C1_halves=(C1_a, C1_b))
    return {
        "negative": bool(np.all(w < 0)),
        "max_w": float(w.max()),
        "C1": C1,
        "C1_halves": (C1_a, C1_b),
        "C1_stable": stable(C1_a, C1_b),
        "lower_ok": bool(np.all(w[delta <= art.eps0] >= lo[delta <= art.eps0] - 1e-12)),
        "gain_increasing": inc,
        "upper_ok": upper_ok,
        "upper_slack_min": float(np.min(up[near] - w[near])) if near.any() else None,
        "near_boundary": int(near.sum()),
    }


def check_sandwich(art: ExhaustionArtifact, points, eps=None) -> dict:
    """Fitted (C1_hat, C2_hat) in log 1/(delta+eps) - C1 lam <= v_eps <= log 1/(delta+f) - C2 lam."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    eps = art.grid if eps is None else np.asarray(eps, dtype=float)
    v, _ = art.v_family(pts, eps)
    delta = art.domain.raw_distance(pts)[:, None]
    lam = art.lam(eps)[None, :]
    f = art.gain(eps)[None, :]
    c1 = float(np.max((np.log(1.0 / (delta + eps)) - v) / lam))
    c2 = float(np.min((np.log(1.0 / (delta + f)) - v) / lam))
    return {"C1_hat": c1, "C2_hat": c2}


def boundary_ray(art: ExhaustionArtifact, ks=range(3, 21), start=None, end=None,
                 scan: int = 4000) -> np.ndarray:
    """Points z_k on a segment from a boundary point inward with delta(z_k) = 2^-k.

    The default start is the patch center closest to the origin, the default
    end the anchor. Each z_k is the first crossing of the level, refined by
    bisection.
    """
    x0 = art.centers[np.argmin(np.linalg.norm(art.centers, axis=1))] if start is None else np.asarray(start)
    x1 = art.anchor if end is None else np.asarray(end)
    t = np.linspace(0.0, 1.0, scan + 1)[1:]
    seg = x0 + t[:, None] * (x1 - x0)
    dl = np.where(art.domain.contains(seg), art.domain.raw_distance(seg), 0.0)
    out = []
    for k in ks:
        target = 2.0 ** -k
        hit = np.flatnonzero(dl >= target)
        if not len(hit):
            raise ValueError(f"ray never reaches delta = 2^-{k}")
        i = hit[0]
        a, b = (t[i - 1] if i else 0.0), t[i]
        for _ in range(80):
            m = 0.5 * (a + b)
            p = x0 + m * (x1 - x0)
            if art.domain.contains(p[None])[0] and art.domain.raw_distance(p[None])[0] >= target:
                b = m
            else:
                a = m
        out.append(x0 + b * (x1 - x0))
    return np.array(out)


def check_ray(art: ExhaustionArtifact, ks=range(3, 21), C1: Optional[float] = None) -> dict:
    """w along an inward ray with delta = 2^-k: monotone rise and the squeeze toward 0.

    With C1 fitted elsewhere, w(z_k) >= lower bound -> 0 and w < 0 pin the
    limit at 0; both are checked at every ray point.
    """
    pts = boundary_ray(art, ks)
    w = art.evaluate(pts)
    delta = art.domain.raw_distance(pts)
    C1 = art.fitted_constants.get("C1") if C1 is None else C1
    lo = lower_bound(art, delta, C1) if C1 is not None else np.full(len(pts), np.nan)
    inc = bool(np.all(np.diff(w) > 0))
    squeeze = bool(np.all((w >= lo - 1e-12) | np.isnan(lo)) and np.all(w < 0)) if C1 is not None else None
    return {"k": list(ks), "delta": delta.tolist(), "w": w.tolist(), "lower": lo.tolist(),
            "increasing": inc, "squeeze": squeeze, "running_sup_monotone": inc,
            "holds": inc and bool(squeeze)}


def check_sup_attainment(art: ExhaustionArtifact, z, c_hat: float) -> dict:
    """Grid eps* maximizing w_eps(z); raises when eps* < c_hat delta(z).

    A maximum at the grid floor means the family is still rising as eps
    shrinks, so the sup over (0, eps0] is not attained on the grid at all;
    that is reported as a violation too.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    E, W, B, delta = art.trace(z)
    return _attainment_report(art, E[0], W[0], B[0], float(delta[0]), c_hat)


def _attainment_report(art, E, W, B, delta, c_hat):
    k = int(np.argmax(W))
    eps_star = float(E[k])
    order = np.argsort(E)
    trace = [(float(E[i]), float(W[i]), int(B[i])) for i in order]
    at_floor = eps_star <= float(art.grid[-1]) and eps_star < delta
    rep = {"attained_at": eps_star, "lower_fraction": eps_star / delta, "delta": delta,
           "branch": int(B[k]), "at_floor": at_floor}
    if at_floor:
        raise AttainmentViolation(
            f"sup of w_eps reached at the grid floor {eps_star:.3g} (delta = {delta:.3g})", trace=trace)
    if eps_star < c_hat * delta:
        raise AttainmentViolation(
            f"eps* = {eps_star:.3g} < c_hat delta = {c_hat * delta:.3g}", trace=trace)
    return rep


def near_boundary_samples(art: ExhaustionArtifact, m: int, rng: np.random.Generator,
                          delta_range=(1e-6, None)) -> np.ndarray:
    """Points pushed inward from boundary samples along the patch direction, delta in range."""
    lo = delta_range[0]
    hi = art.eps0 if delta_range[1] is None else delta_range[1]
    out = []
    while sum(len(o) for o in out) < m:
        b = sample_boundary(art.domain, 2 * m, rng)
        j = art.tree.query(b)[1]
        t = np.exp(rng.uniform(math.log(lo), math.log(hi), len(b)))
        p = b + t[:, None] * art.directions[j]
        ok = art.domain.contains(p)
        p = p[ok]
        d = art.domain.raw_distance(p)
        out.append(p[(d >= lo) & (d < hi)])
    return np.concatenate(out)[:m]


def fit_attainment(art: ExhaustionArtifact, points) -> dict:
    """Fitted c_hat = min eps*/delta with floor hits counted as violations."""
    E, W, B, delta = art.trace(points)
    k = np.argmax(W, axis=1)
    eps_star = E[np.arange(len(E)), k]
    at_floor = (eps_star <= art.grid[-1]) & (eps_star < delta)
    frac = eps_star / delta
    c_hat = float(frac[~at_floor].min()) if (~at_floor).any() else 0.0
    return {"c_hat": c_hat, "floor_hits": int(at_floor.sum()), "n": len(delta),
            "eps_star": eps_star, "delta": delta, "branch": B[np.arange(len(E)), k]}


def check_attainment(art: ExhaustionArtifact, set_a, set_b) -> dict:
    a = fit_attainment(art, set_a)
    b = fit_attainment(art, set_b)
    c_hat = min(a["c_hat"], b["c_hat"])
    ok = a["floor_hits"] == 0 and b["floor_hits"] == 0 and c_hat > 0
    art.fitted_constants.update(c_hat=c_hat)
    return {"c_hat": c_hat, "c_hat_halves": (a["c_hat"], b["c_hat"]),
            "stable": stable(a["c_hat"], b["c_hat"]),
            "floor_hits": a["floor_hits"] + b["floor_hits"], "n": a["n"] + b["n"],
            "eps_star_range": (float(min(a["eps_star"].min(), b["eps_star"].min())),
                               float(max(a["eps_star"].max(), b["eps_star"].max()))),
            "holds": ok and stable(a["c_hat"], b["c_hat"])}


def levi_floor_profile(delta, C_tilde1: float = 1.0) -> np.ndarray:
    L = np.log(1.0 / np.asarray(delta, dtype=float))
    return np.log(C_tilde1 * L) / L


def check_levi_floor(art: ExhaustionArtifact, samples, h: float = 1e-4,
                     C_tilde1: Optional[float] = None, min_fraction: float = 0.8) -> dict:
    """Levi min-eigenvalue of the attained member w_eps* against the floor profile.

    Samples whose stencil sees a different active branch of v_eps* are
    skipped as non-smooth.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    C_tilde1 = art.gain.C_tilde if C_tilde1 is None else C_tilde1
    E, W, B, delta = art.trace(pts)
    k = np.argmax(W, axis=1)
    eps_star = E[np.arange(len(pts)), k]
    ratios, lams, skipped = [], [], 0
    for p, e, dl in zip(pts, eps_star, delta):
        try:
            rep = levi_at(art, p, float(e), h)
        except NonSmoothPoint:
            skipped += 1
            continue
        lams.append(rep.min_eigenvalue)
        ratios.append(rep.min_eigenvalue / float(levi_floor_profile(dl, C_tilde1)))
    used = len(ratios)
    C_fit = float(min(ratios)) if ratios else float("nan")
    frac = used / len(pts) if len(pts) else 0.0
    art.fitted_constants.update(levi_C=C_fit)
    return {"fitted_C": C_fit, "used": used, "skipped": skipped, "fraction": frac,
            "min_eigenvalue": float(min(lams)) if lams else float("nan"),
            "passes": bool(used and C_fit > 0 and frac >= min_fraction)}


def levi_at(art: ExhaustionArtifact, point, eps: float, h: float):
    """Levi form of w_eps at a point, refusing stencils that straddle branches."""
    p = np.asarray(point, dtype=float)
    st = _stencil(p, h)
    if not art.domain.contains(st).all():
        raise NonSmoothPoint(f"stencil of step {h:g} leaves the domain at {p.tolist()}")
    _, br = art.v_family(st, np.array([eps]))
    if np.unique(br[:, 0]).size > 1:
        raise NonSmoothPoint(f"active branch changes inside the stencil at {p.tolist()}")
    return levi_form(art.w_eps_field(eps), p, step=h)


def exhaustion_psh_check(art: ExhaustionArtifact, m: int = 200,
                         rng: Optional[np.random.Generator] = None, radius_scale: float = 0.25) -> dict:
    """Sub-mean-value test of w on interior circles kept inside the domain."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = sample_interior(art.domain, m, rng)
    delta = art.domain.raw_distance(pts)
    r = radius_scale * float(np.median(delta))
    keep = delta > 2 * r
    return check_psh(art.w, pts[keep], radii=(0.2 * r, r), rng=rng, skip_outside=True)


__all__ = [
    "ExhaustionConfig", "ExhaustionArtifact", "bump_levi_bound", "build_bump", "v_eps_j", "v_eps",
    "build_exhaustion", "lower_bound", "upper_bound", "check_bounds", "check_sandwich",
    "boundary_ray", "check_ray", "check_sup_attainment", "near_boundary_samples",
    "fit_attainment", "check_attainment", "check_levi_floor", "levi_at", "levi_floor_profile",
    "exhaustion_psh_check",
]
