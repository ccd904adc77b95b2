"""Sampled verification of domain atlases, segment property, translation
estimates, and the cover sets used by the approximation construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import CoverDegenerate, NoCoveringPatch, PointOutsideDomain
from .geometry import BoundedDomain, sample_boundary, sample_interior


def _ball_sample(center, radius, m, rng):
    d = center.size
    v = rng.standard_normal((m, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return center + radius * rng.random((m, 1)) ** (1.0 / d) * v


def verify_domain(domain: BoundedDomain, rng: np.random.Generator, boundary_samples: int = 10 ** 4,
                  per_patch: int = 64, max_patches: int = 64, pairs: int = 2000) -> dict:
    """Sampled check of the atlas invariants.

    Covers: orthonormal frames, graph separation inside B(x_j, 4 r_j),
    regularity of the graph functions, covering of the boundary by the balls
    B(x_j, r_j), and the stated diameter.
    """
    report = {"op": "domain.verify", "domain": domain.name}
    atlas = domain.atlas
    pick = np.unique(np.linspace(0, len(atlas) - 1, min(max_patches, len(atlas))).astype(int))
    frame_err = max(float(np.max(np.abs(p.frame.T @ p.frame - np.eye(p.dim)))) for p in atlas)
    sep_bad = []
    fitted_norm = 0.0
    for j in pick:
        patch = atlas[j]
        pts = _ball_sample(patch.center, 4 * patch.radius, per_patch, rng)
        hgt = patch.height_above_graph(pts)
        ins = domain.contains(pts)
        tol = 1e-9 if patch.closed_form else 1e-7 * patch.radius
        wrong = ((hgt > tol) & ~ins) | ((hgt < -tol) & ins)
        for p, h in zip(pts[wrong], hgt[wrong]):
            sep_bad.append({"patch": int(j), "point": p.tolist(), "height": float(h)})
        # regularity on B'(0, 4r), finite part of the graph only
        hd = patch.dim - 1
        ya = _ball_sample(np.zeros(hd), 4 * patch.radius, pairs // len(pick) + 8, rng)
        step = rng.standard_normal(ya.shape)
        step *= (rng.random((len(ya), 1)) * 0.1 * patch.radius) / np.linalg.norm(step, axis=1,
                                                                                 keepdims=True)
        yb = ya + step
        inside_b = np.linalg.norm(yb, axis=1) < 4 * patch.radius
        ga, gb = patch.graph_fn(ya), patch.graph_fn(yb)
        ok = inside_b & np.isfinite(ga) & np.isfinite(gb)
        if ok.any():
            r = np.linalg.norm(ya - yb, axis=1)[ok]
            mod = patch.regularity.modulus(np.maximum(r, 1e-300))
            fitted_norm = max(fitted_norm, float(np.max(np.abs(ga[ok] - gb[ok]) / mod)))
    bpts = sample_boundary(domain, boundary_samples, rng)
    centers = np.array([p.center for p in atlas])
    radii = np.array([p.radius for p in atlas])
    tree = cKDTree(centers)
    near = tree.query_ball_point(bpts, radii.max())
    uncovered = [i for i, nb in enumerate(near)
                 if not any(np.linalg.norm(bpts[i] - centers[k]) < radii[k] for k in nb)]
    inner = sample_interior(domain, 2000, rng)
    allp = np.concatenate([bpts[:2000], inner])
    span = float(np.max(np.linalg.norm(allp[:, None, :] - allp[None, ::4, :], axis=2)))
    report.update({
        "frame_error": frame_err,
        "separation_violations": sep_bad[:20],
        "n_separation_violations": len(sep_bad),
        "fitted_norm": fitted_norm,
        "norm": domain.regularity.norm if domain.regularity else None,
        "uncovered": len(uncovered),
        "sampled_span": span,
        "diameter": domain.diameter,
    })
    report["verdict"] = bool(frame_err <= 1e-12 and not sep_bad and not uncovered
                             and fitted_norm <= report["norm"]
                             and domain.diameter >= 0.99 * span)
    return report


def covering_patch(domain: BoundedDomain, q) -> int:
    """Index of the atlas ball B(x_j, r_j) nearest its center containing q."""
    centers = np.array([p.center for p in domain.atlas])
    radii = np.array([p.radius for p in domain.atlas])
    d = np.linalg.norm(centers - q, axis=1)
    ok = np.flatnonzero(d < radii)
    if len(ok) == 0:
        raise NoCoveringPatch(f"boundary point {np.asarray(q).tolist()} lies in no atlas ball")
    return int(ok[np.argmin(d[ok] / radii[ok])])


DEFAULT_T_GRID = tuple(np.linspace(0.05, 1.0, 20))


def check_segment_property(domain: BoundedDomain, boundary_samples: int = 200,
                           t_grid: Sequence[float] = DEFAULT_T_GRID,
                           rng: Optional[np.random.Generator] = None, neighbors: int = 8,
                           directions: int = 64, probe_scale: float = 0.5) -> dict:
    """Sampled segment-property test.

    With an atlas: near each sampled boundary point q, the covering patch's
    direction w_j must push every sampled z in the closure near q into the
    domain, z + t eps_w w_j for t in ``t_grid``. In probe mode (no atlas),
    each of ``directions`` unit vectors is tried at the probe center and on
    the domain's probe points; the report then lists which directions fail.
    """
    if boundary_samples < 1:
        raise ValueError("boundary_samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    t = np.asarray(t_grid, dtype=float)
    if domain.probe_only:
        return _segment_probe(domain, t * probe_scale, rng, directions, neighbors)
    eps_w = domain.eps_w
    witnesses = []
    bpts = sample_boundary(domain, boundary_samples, rng)
    for q in bpts:
        j = covering_patch(domain, q)
        patch = domain.atlas[j]
        zs = [q[None]]
        cand = _ball_sample(q, patch.radius / 4, 4 * neighbors, rng)
        zs.append(cand[domain.contains(cand)][:neighbors])
        z = np.concatenate(zs)
        trial = z[:, None, :] + (t * eps_w)[None, :, None] * patch.direction
        ins = domain.contains(trial.reshape(-1, z.shape[1])).reshape(len(z), len(t))
        for a, b in zip(*np.nonzero(~ins)):
            witnesses.append({"boundary_point": q.tolist(), "z": z[a].tolist(),
                              "t": float(t[b]), "patch": j})
    return {"op": "domain.segment_check", "domain": domain.name, "passes": not witnesses,
            "samples": int(boundary_samples), "witnesses": witnesses[:50],
            "n_witnesses": len(witnesses)}


def _segment_probe(domain, t, rng, directions, neighbors):
    d = domain.real_dim
    p0 = domain.probe_center if domain.probe_center is not None else np.zeros(d)
    ws = rng.standard_normal((directions, d))
    ws /= np.linalg.norm(ws, axis=1, keepdims=True)
    failed = []
    for k, w in enumerate(ws):
        zs = [p0[None]]
        cand = _ball_sample(p0, float(t.max()), 8 * neighbors, rng)
        zs.append(cand[domain.contains(cand)][:neighbors])
        if domain.probe_points is not None:
            zs.append(domain.probe_points(w, t))
        z = np.concatenate(zs)
        bad = None
        for zz in z:
            trial = zz + t[:, None] * w
            ins = domain.contains(trial)
            if not ins.all():
                i = int(np.argmin(ins))
                bad = {"direction": k, "z": zz.tolist(), "t": float(t[i])}
                break
        if bad is not None:
            failed.append(bad)
    return {"op": "domain.segment_check", "domain": domain.name, "mode": "probe",
            "passes": len(failed) < directions, "directions": directions,
            "failed_directions": len(failed), "witnesses": failed}


def check_translation_estimate(domain: BoundedDomain, patch_index: int, sample_points,
                               eps_grid, c: float = 2.0, tol: float = 1e-12) -> dict:
    """delta(z) + f(eps) <= delta(z + eps w_j) <= delta(z) + eps on a (z, eps) grid.

    ``fitted_constant`` is the largest k with delta(z) + k f(eps) <= delta(z + eps w_j)
    at every pair; ``holds`` asks for the upper bound everywhere and k > 0,
    ``nominal`` additionally for k >= 1.
    """
    patch = domain.atlas[patch_index]
    z = np.atleast_2d(np.asarray(sample_points, dtype=float))
    eps = np.asarray(eps_grid, dtype=float)
    if np.any(np.linalg.norm(z - patch.center, axis=1) >= patch.radius / c):
        raise ValueError(f"sample points must lie in B(x_j, r_j/{c:g})")
    f = domain.regularity.gain_fn
    fe = f(eps)
    d0 = domain.raw_distance(z)
    if not domain.contains(z).all():
        raise PointOutsideDomain("translation samples must lie inside the domain")
    moved = (z[:, None, :] + eps[None, :, None] * patch.direction).reshape(-1, z.shape[1])
    inside = domain.contains(moved)
    d1 = np.where(inside, domain.raw_distance(moved), -np.inf).reshape(len(z), len(eps))
    gainv = d1 - d0[:, None]
    upper_bad = gainv > eps[None, :] + tol * (1 + d0[:, None])
    ratio = gainv / fe[None, :]
    fitted = float(np.min(ratio))
    violations = []
    for a, b in zip(*np.nonzero(upper_bad | (gainv < 0) | ~inside.reshape(gainv.shape))):
        violations.append({"z": z[a].tolist(), "eps": float(eps[b]), "delta": float(d0[a]),
                           "delta_moved": float(d1[a, b])})
    return {"op": "domain.translation_check", "domain": domain.name, "patch": int(patch_index),
            "holds": bool(not violations and fitted > 0), "nominal": bool(fitted >= 1.0),
            "fitted_constant": fitted, "violations": violations[:50],
            "n_pairs": int(gainv.size), "delta": d0, "delta_moved": d1, "gain": fe}


# ----------------------------------------------------------------------------
# cover sets


@dataclass
class Cover:
    """Cover sets W_j, B_j, B_j^- and the compact sets K_k.

    Index 0 is the interior piece W_0 = {delta > eps_w}; index j >= 1 is the
    ball around atlas patch j - 1. Distances to the boundary of the interior
    pieces use the level-set reading delta(z, {delta = s}) = |delta(z) - s|.
    """

    domain: BoundedDomain
    eps_w: float
    centers: np.ndarray
    W_radius: np.ndarray
    B_radius: np.ndarray
    Bminus_radius: np.ndarray
    d_list: np.ndarray
    cloud: np.ndarray
    cloud_delta: np.ndarray
    K_list: list
    stats: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.centers) + 1

    def _depth(self, j, pts, delta, level):
        """Signed distance of pts to the boundary of the j-th piece (positive inside)."""
        if j == 0:
            return delta - level[0]
        return level[j] - np.linalg.norm(pts - self.centers[j - 1], axis=1)

    def depth_B(self, j, pts, delta):
        return self._depth(j, pts, delta, self._levels_B)

    def depth_Bminus(self, j, pts, delta):
        return self._depth(j, pts, delta, self._levels_Bm)

    @property
    def _levels_B(self):
        return np.concatenate([[1.5 * self.eps_w], self.B_radius])

    @property
    def _levels_Bm(self):
        return np.concatenate([[2.0 * self.eps_w], self.Bminus_radius])

    def candidates(self, pts, radius_attr="B_radius"):
        """For each point, patch indices (>= 1) whose ball of the given kind may contain it."""
        tree = self.__dict__.setdefault("_tree", cKDTree(self.centers))
        rad = getattr(self, radius_attr)
        return tree.query_ball_point(pts, float(rad.max()))


def _closure_cloud(domain, spacing, rng, boundary_count):
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bbox)
    if domain.real_dim == 2:
        axes = [np.arange(a, b + spacing, spacing) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
        inner = grid[domain.contains(grid)]
    else:
        inner = sample_interior(domain, 200000, rng)
    return inner, sample_boundary(domain, boundary_count, rng)


def build_cover(domain: BoundedDomain, rng: Optional[np.random.Generator] = None,
                samples: int = 10 ** 4, cloud_spacing: Optional[float] = None,
                shrink: float = 0.9) -> Cover:
    """Cover sets for the approximation construction, checked on samples.

    K_k is stored as a point cloud of the closure (grid plus boundary
    samples) filtered by its defining predicate.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    eps_w = domain.eps_w
    centers = np.array([p.center for p in domain.atlas])
    r = np.array([p.radius for p in domain.atlas])
    W = 4 * r
    B = W - eps_w / 2
    Bm = W - eps_w
    m = len(centers)
    h = eps_w / 20 if cloud_spacing is None else cloud_spacing
    inner, bnd = _closure_cloud(domain, h, rng, max(samples, int(40 * domain.diameter / h)))
    cloud = np.concatenate([inner, bnd])
    delta = np.concatenate([domain.raw_distance(inner), np.zeros(len(bnd))])
    cover = Cover(domain=domain, eps_w=eps_w, centers=centers, W_radius=W, B_radius=B,
                  Bminus_radius=Bm, d_list=np.zeros(m + 1), cloud=cloud, cloud_delta=delta,
                  K_list=[])

    # covering of the sampled closure by the B_j^-
    s_in = sample_interior(domain, samples // 2, rng)
    s_bd = sample_boundary(domain, samples - samples // 2, rng)
    test = np.concatenate([s_in, s_bd])
    tdelta = np.concatenate([domain.raw_distance(s_in), np.zeros(len(s_bd))])
    depth = _max_depth(cover, test, tdelta)
    if np.any(depth <= 0):
        bad = test[depth <= 0][0]
        raise CoverDegenerate(f"sets B_j^- miss {int(np.sum(depth <= 0))} sampled points, "
                              f"e.g. {bad.tolist()}")

    # d_j: sampled distance from dB_j within the closure to the boundary of the
    # union of the other B_k^-, bounded below by the deepest single membership
    d_list = np.empty(m + 1)
    on_dB = []
    for j in range(m + 1):
        if j == 0:
            sel = np.abs(delta - 1.5 * eps_w) <= h
            pts, dl = cloud[sel], delta[sel]
        else:
            v = rng.standard_normal((400, domain.real_dim))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            pts = centers[j - 1] + B[j - 1] * v
            ins = domain.contains(pts)
            pts = pts[ins]
            dl = domain.raw_distance(pts) if len(pts) else np.zeros(0)
        on_dB.append(len(pts))
        if len(pts) == 0:
            d_list[j] = eps_w / 2
            continue
        dep = _max_depth(cover, pts, dl, exclude=j)
        d_list[j] = shrink * float(np.min(dep))
    cover.d_list = d_list

    # K_k = union_j {z in closure : delta(z, dB_j) <= d_j} intersected with closed B_k^-
    near_dB = np.zeros(len(cloud), dtype=bool)
    near_dB |= np.abs(delta - 1.5 * eps_w) <= d_list[0]
    tree = cKDTree(cloud)
    for j in range(1, m + 1):
        idx = np.asarray(tree.query_ball_point(centers[j - 1], B[j - 1] + d_list[j]), dtype=int)
        if len(idx) == 0:
            continue
        dist = np.abs(np.linalg.norm(cloud[idx] - centers[j - 1], axis=1) - B[j - 1])
        near_dB[idx[dist <= d_list[j]]] = True
    K = []
    gap = []
    for k in range(m + 1):
        sel = near_dB & (cover.depth_Bminus(k, cloud, delta) >= 0)
        K.append(cloud[sel])
        if sel.any():
            gap.append(float(np.min(cover.depth_B(k, cloud[sel], delta[sel]))))
    cover.K_list = K
    cover.stats = {"cloud_points": int(len(cloud)), "cloud_spacing": h,
                   "d_min": float(d_list.min()), "d_ok": bool(d_list.min() >= eps_w / 2),
                   "K_gap_min": min(gap) if gap else None,
                   "K_gap_ok": bool(not gap or min(gap) >= eps_w / 2 - 1e-12),
                   "dB_samples": on_dB}
    return cover


def _max_depth(cover, pts, delta, kind="Bminus", exclude=None):
    """Deepest membership of each point over the pieces of the given kind."""
    levels = cover._levels_Bm if kind == "Bminus" else cover._levels_B
    out = delta - levels[0] if exclude != 0 else np.full(len(pts), -np.inf)
    out = np.array(out, dtype=float)
    for i, nb in enumerate(cover.candidates(pts)):
        nb = [k for k in nb if k + 1 != exclude]
        if nb:
            dp = levels[np.add(nb, 1)] - np.linalg.norm(cover.centers[nb] - pts[i], axis=1)
            out[i] = max(out[i], float(dp.max()))
    return out
