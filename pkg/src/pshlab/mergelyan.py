"""Approximation of a continuous plurisubharmonic function on the closure of
a graph domain by plurisubharmonic functions defined on a neighborhood.

Each boundary patch j contributes the translate phi(z + nu w_j) corrected by a
cutoff; the interior piece uses phi itself. The approximant is the pointwise
max of the pieces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from .checks import Cover, build_cover
from .errors import MarginViolated, NuTooLarge, TranslateEscapes
from .geometry import BoundedDomain, sample_boundary, sample_interior
from .psh import ScalarField, check_psh, modulus_of_continuity, mollify, random_complex_directions
from .special import GainFunction

# quintic smoothstep and the maxima of its first two derivatives on [0, 1]
S1_MAX = 30.0 / 16.0
S2_MAX = 10.0 / np.sqrt(3.0)


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    # rounding near t = 1 can overshoot by a few ulp
    return np.clip(t * t * t * (t * (6.0 * t - 15.0) + 10.0), 0.0, 1.0)


def radial_levi_floor(a: float) -> float:
    """Lower bound on the complex Hessian of z -> -S((|z - p| - a)/a).

    With F(rho) the profile, the eigenvalues are (F'' + F'/rho)/4 along the
    radial complex line and F'/(2 rho) across it; on the transition rho >= a.
    """
    radial = (S2_MAX + S1_MAX) / (4.0 * a * a)
    across = S1_MAX / (2.0 * a * a)
    return max(radial, across)


@dataclass
class CutoffFamily:
    """xi_k = -S((delta(z, K_k) - eps_w/4) / (eps_w/4)) for k = 0..m."""

    cover: Cover
    eps_w: float
    curvature_bound: float
    trees: list

    def xi(self, k: int, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        tree = self.trees[k]
        if tree is None:
            return np.full(len(pts), -1.0)
        a = self.eps_w / 4.0
        d, _ = tree.query(pts, distance_upper_bound=2.0 * a + 1e-12)
        return -smoothstep((d - a) / a)

    def field(self, k: int) -> ScalarField:
        return ScalarField(lambda p: self.xi(k, p), lambda p: np.ones(len(p), dtype=bool),
                           f"xi_{k}", self.cover.domain.dimension)


def build_cutoffs(cover: Cover, eps_w: Optional[float] = None, safety: float = 2.0) -> CutoffFamily:
    eps_w = cover.eps_w if eps_w is None else eps_w
    trees = [cKDTree(K) if len(K) else None for K in cover.K_list]
    bound = safety * radial_levi_floor(eps_w / 4.0)
    return CutoffFamily(cover=cover, eps_w=eps_w, curvature_bound=bound, trees=trees)


@dataclass
class ApproximantArtifact:
    domain: BoundedDomain
    phi: ScalarField
    nu: float
    omega_nu: float
    c: float
    anchor: np.ndarray
    cover: Cover
    cutoffs: CutoffFamily
    directions: np.ndarray
    omega_source: str
    U_margin: Optional[float] = None
    v: Optional[ScalarField] = None
    stats: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.cover.size

    def _translate_ok(self, j, pts, moved):
        """z in U_j: z + nu w_j inside the domain and (j >= 1) inside W_j."""
        ok = self.domain.contains(moved)
        if j == 0:
            ok[ok] = self.domain.raw_distance(moved[ok]) > self.cover.eps_w
        else:
            ok &= np.linalg.norm(moved - self.cover.centers[j - 1], axis=1) < \
                self.cover.W_radius[j - 1]
        return ok

    def _active(self, pts):
        """Interior rows and (rows, cols) pairs with z in U_j intersected with closed B_j."""
        inside = self.domain.contains(pts)
        sel = np.flatnonzero(inside)
        if len(sel):
            # closed B_0 = {delta >= 1.5 eps_w}, U_0 = {delta > eps_w}
            sel = sel[self.domain.raw_distance(pts[sel]) >= 1.5 * self.cover.eps_w]
        cand = self.cover.candidates(pts)
        lens = np.fromiter((len(nb) for nb in cand), dtype=int, count=len(cand))
        if lens.sum() == 0:
            return sel, []
        rows = np.repeat(np.arange(len(pts)), lens)
        cols = np.concatenate([np.asarray(nb, dtype=int) for nb in cand if len(nb)])
        inB = np.linalg.norm(pts[rows] - self.cover.centers[cols], axis=1) <= \
            self.cover.B_radius[cols]
        rows, cols = rows[inB], cols[inB]
        order = np.argsort(cols, kind="stable")
        rows, cols = rows[order], cols[order]
        starts = np.flatnonzero(np.r_[True, cols[1:] != cols[:-1]])
        groups = []
        for a, b in zip(starts, np.r_[starts[1:], len(cols)]):
            j, r = cols[a], rows[a:b]
            moved = pts[r] + self.nu * self.directions[j + 1]
            ok = self._translate_ok(j + 1, pts[r], moved)
            if ok.any():
                groups.append((j, r[ok], moved[ok]))
        return sel, groups

    def piece_values(self, pts) -> np.ndarray:
        """(N, m+1) array of f_j(z), -inf where z is not in U_j intersected with closed B_j."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full((len(pts), self.size), -np.inf)
        corr_base = self.c * np.sum((pts - self.anchor) ** 2, axis=1)
        sel, groups = self._active(pts)
        if len(sel):
            out[sel, 0] = self.phi(pts[sel], check=False) + 3 * self.omega_nu * (
                self.cutoffs.xi(0, pts[sel]) + corr_base[sel])
        for j, r, moved in groups:
            out[r, j + 1] = self.phi(moved, check=False) + 3 * self.omega_nu * (
                self.cutoffs.xi(j + 1, pts[r]) + corr_base[r])
        return out

    def evaluate(self, pts) -> np.ndarray:
        return np.max(self.piece_values(pts), axis=1)

    def in_U(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        hit = np.zeros(len(pts), dtype=bool)
        sel, groups = self._active(pts)
        hit[sel] = True
        for _, r, _ in groups:
            hit[r] = True
        return hit


def default_anchor(domain: BoundedDomain) -> np.ndarray:
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bbox)
    mid = 0.5 * (lo + hi)
    if domain.contains(mid[None])[0]:
        return mid
    return sample_interior(domain, 1, np.random.default_rng(0))[0]


def build_approximant(domain: BoundedDomain, phi: ScalarField, nu: float,
                      omega: Union[None, float, Callable] = None,
                      cover: Optional[Cover] = None, cutoffs: Optional[CutoffFamily] = None,
                      anchor=None, rng: Optional[np.random.Generator] = None,
                      check_translates: int = 2000) -> ApproximantArtifact:
    """Max-of-translates approximant of ``phi`` with translation size ``nu``.

    ``omega`` may be a number (omega(nu) itself) or a modulus callable; by
    default the field's analytic modulus is used when present and the
    empirical envelope otherwise.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if nu >= domain.eps_w / 2:
        raise NuTooLarge(f"nu = {nu:g} must be below eps_w/2 = {domain.eps_w / 2:g}")
    rng = np.random.default_rng(0) if rng is None else rng
    cover = build_cover(domain, rng) if cover is None else cover
    cutoffs = build_cutoffs(cover) if cutoffs is None else cutoffs
    if omega is None and phi.modulus is not None:
        omega_nu, source = float(phi.modulus(nu)), "analytic"
    elif omega is None:
        omega_nu, source = float(modulus_of_continuity(phi, domain, rng=rng)(nu)), "empirical"
    elif callable(omega):
        omega_nu, source = float(omega(nu)), "callable"
    else:
        omega_nu, source = float(omega), "given"
    dirs = np.vstack([np.zeros(domain.real_dim)] + [p.direction for p in domain.atlas])
    art = ApproximantArtifact(domain=domain, phi=phi, nu=float(nu), omega_nu=omega_nu,
                              c=cutoffs.curvature_bound,
                              anchor=default_anchor(domain) if anchor is None else np.asarray(anchor),
                              cover=cover, cutoffs=cutoffs, directions=dirs, omega_source=source)
    # translates of sampled closure points in closed B_j must stay inside
    probe = np.concatenate([sample_boundary(domain, check_translates, rng),
                            sample_interior(domain, check_translates, rng)])
    cand = cover.candidates(probe)
    lens = np.fromiter((len(nb) for nb in cand), dtype=int, count=len(cand))
    if lens.sum():
        rows = np.repeat(np.arange(len(probe)), lens)
        cols = np.concatenate([np.asarray(nb, dtype=int) for nb in cand if len(nb)])
        inB = np.linalg.norm(probe[rows] - cover.centers[cols], axis=1) <= cover.B_radius[cols]
        rows, cols = rows[inB], cols[inB]
        escaped = ~domain.contains(probe[rows] + nu * dirs[cols + 1])
        if escaped.any():
            i, k = rows[escaped][0], cols[escaped][0]
            raise TranslateEscapes(f"patch {k}: {probe[i].tolist()} + nu w_j leaves {domain.name}")
    art.v = ScalarField(art.evaluate, art.in_U, f"v[{phi.label},nu={nu:g}]", domain.dimension)
    return art


def closure_samples(domain: BoundedDomain, m: int, rng: np.random.Generator) -> np.ndarray:
    """Half interior, half boundary points of the closure."""
    return np.concatenate([sample_interior(domain, m - m // 2, rng),
                           sample_boundary(domain, m // 2, rng)])


def check_uniform_error(art: ApproximantArtifact, points) -> dict:
    """sup |v - phi| on the given closure points against omega(nu) (1 + C diam).

    ``C_construction`` is the constant the construction guarantees,
    3 max(1, c R^2) / diam with R the largest distance to the anchor;
    ``C_fit`` is the smallest constant that fits the sampled errors.
    """
    pts = np.atleast_2d(points)
    v = art.evaluate(pts)
    phi = art.phi(pts, check=False)
    err = np.abs(v - phi)
    sup = float(np.max(err))
    diam = art.domain.diameter
    R2 = float(np.max(np.sum((pts - art.anchor) ** 2, axis=1)))
    C_con = 3.0 * max(1.0, art.c * R2) / diam
    om = art.omega_nu
    C_fit = float(max(np.max(err / om - 1.0), 0.0) / diam) if om > 0 else 0.0
    bound = om * (1.0 + C_con * diam)
    return {"sup_error": sup, "bound": bound, "omega_nu": om, "C_construction": C_con,
            "C_fit": C_fit, "finite": bool(np.all(np.isfinite(v))),
            "holds": bool(np.all(np.isfinite(v)) and sup <= bound * (1 + 1e-12) + 1e-12)}


def check_boundary_crossing(art: ApproximantArtifact, per_piece: int = 100,
                            rng: Optional[np.random.Generator] = None) -> dict:
    """At sampled z on dB_j inside U: some other piece beats f_j by omega(nu).

    For j >= 1, dB_j is the sphere of radius B_j about x_j; for the interior
    piece it is the level set delta = 1.5 eps_w, sampled from the cover cloud.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    cover = art.cover
    worst = np.inf
    checked = 0
    fails = []
    for j in range(art.size):
        if j == 0:
            sel = np.abs(cover.cloud_delta - 1.5 * cover.eps_w) <= cover.stats["cloud_spacing"] / 4
            pts = cover.cloud[sel]
            if len(pts) > per_piece:
                pts = pts[rng.choice(len(pts), per_piece, replace=False)]
            if len(pts):
                # project radially onto the level set along the distance gradient
                pts = pts[np.abs(art.domain.raw_distance(pts) - 1.5 * cover.eps_w) < 1e-3 * cover.eps_w]
        else:
            v = random_complex_directions(art.domain.dimension, per_piece, rng)
            pts = cover.centers[j - 1] + cover.B_radius[j - 1] * v
        if len(pts) == 0:
            continue
        vals = art.piece_values(pts)
        fj = vals[:, j]
        live = np.isfinite(fj)
        if not live.any():
            continue
        others = np.delete(vals[live], j, axis=1)
        best = np.max(others, axis=1) if others.shape[1] else np.full(int(live.sum()), -np.inf)
        slack = best - fj[live]
        checked += int(live.sum())
        worst = min(worst, float(np.min(slack)))
        for k in np.flatnonzero(slack < art.omega_nu * (1 - 1e-6)):
            fails.append({"piece": j, "z": pts[live][k].tolist(), "slack": float(slack[k])})
    return {"checked": checked, "worst_slack": worst if checked else None,
            "required": art.omega_nu * (1 - 1e-6), "holds": not fails, "failures": fails[:20],
            "n_failures": len(fails)}


def certify_neighborhood(art: ApproximantArtifact, f: Optional[GainFunction] = None,
                         samples: int = 10 ** 4, directions: int = 16, doublings: int = 6,
                         rng: Optional[np.random.Generator] = None) -> float:
    """Largest sampled radius m with B(z, m) inside U at every sampled closure point.

    Balls are probed on spheres of radius m/2 and m in ``directions`` random
    directions plus the coordinate axes; m runs over f(nu) 2^k. Raises
    MarginViolated when some sampled point fails already at f(nu).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    f = art.domain.regularity.gain_fn if f is None else f
    base = float(f(art.nu))
    dom = art.domain
    pts = np.concatenate([sample_boundary(dom, samples, rng), sample_interior(dom, samples // 10, rng)])
    d = dom.real_dim
    dirs = np.vstack([random_complex_directions(dom.dimension, directions, rng),
                      np.eye(d), -np.eye(d)])
    alive = np.ones(len(pts), dtype=bool)
    margin = None
    for k in range(doublings + 1):
        rad = base * 2.0 ** k
        idx = np.flatnonzero(alive)
        probe = (pts[idx, None, None, :] + np.array([0.5, 1.0])[None, :, None, None] * rad
                 * dirs[None, None, :, :]).reshape(-1, d)
        ok = art.in_U(probe).reshape(len(idx), -1).all(axis=1)
        if k == 0 and not ok.all():
            bad = pts[idx[~ok][0]]
            raise MarginViolated(f"B(z, f(nu) = {base:g}) leaves U at {bad.tolist()}",
                                 witness=bad.tolist())
        if not ok.all():
            break
        margin = rad
    art.U_margin = margin
    art.stats["margin_base"] = base
    return margin


def smooth_approximant(art: ApproximantArtifact) -> ScalarField:
    """Mollify v at a quarter of the certified margin."""
    if not art.U_margin or art.U_margin <= 0:
        raise ValueError("smoothing needs a positive certified margin; run certify_neighborhood")
    return mollify(art.v, art.U_margin / 4.0)


def approximant_psh_check(art: ApproximantArtifact, m: int = 400,
                          rng: Optional[np.random.Generator] = None) -> dict:
    """Sub-mean-value test of v on circles about closure points inside U."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = closure_samples(art.domain, m, rng)
    scale = art.U_margin if art.U_margin else float(art.domain.regularity.gain_fn(art.nu))
    radii = [0.05 * scale, 0.25 * scale]
    vals = art.evaluate(pts)
    tol = 1e-9 * (1.0 + float(np.max(np.abs(vals))))
    return check_psh(art.v, pts, directions=4, radii=radii, tol=tol, rng=rng, skip_outside=True)
