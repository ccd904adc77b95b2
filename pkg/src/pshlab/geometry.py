"""Bounded domains in C^n = R^{2n} described by boundary atlases of graph patches.

Points are real arrays of shape ``(N, 2n)`` in interleaved coordinates
``(x1, y1, ..., xn, yn)`` so that ``z_k = x_k + i y_k``. The last real axis is
therefore ``i e_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import ConvergenceFailure, PointOutsideDomain
from .special import GainFunction

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def to_real(z) -> np.ndarray:
    """Complex points (N, n) -> interleaved real points (N, 2n)."""
    z = np.ascontiguousarray(np.atleast_2d(np.asarray(z, dtype=complex)))
    return z.view(float).reshape(z.shape[0], -1).copy()


def to_complex(p) -> np.ndarray:
    p = np.ascontiguousarray(np.atleast_2d(np.asarray(p, dtype=float)))
    return p.view(complex).reshape(p.shape[0], -1).copy()


def complete_frame(w) -> np.ndarray:
    """Orthonormal frame (columns) whose last column is the unit vector ``w``."""
    w = np.asarray(w, dtype=float)
    w = w / np.linalg.norm(w)
    d = w.size
    m = np.eye(d)
    m = np.column_stack([w, m])
    q, _ = np.linalg.qr(m)
    q = q[:, :d]
    if q[:, 0] @ w < 0:
        q = -q
    frame = np.column_stack([q[:, 1:], w])
    return frame


@dataclass(frozen=True)
class RegularitySpec:
    """Regularity class of a boundary atlas and the resulting translation gain."""

    class_tag: str  # "C0" | "hoelder" | "lipschitz" | "loglip"
    norm: float
    gain_fn: GainFunction
    exponent: Optional[float] = None

    def modulus(self, r):
        """The modulus of continuity shape attached to ``class_tag``."""
        r = np.asarray(r, dtype=float)
        if self.class_tag == "lipschitz":
            return r
        if self.class_tag == "hoelder":
            return r ** self.exponent
        if self.class_tag == "loglip":
            return r * np.log(1.0 / r)
        raise ValueError("C0 regularity carries no modulus")


@dataclass(frozen=True)
class GraphPatch:
    """One boundary chart: near ``center`` the domain is ``{t > graph_fn(y')}``.

    ``frame`` holds an orthonormal basis as columns; the last column is the
    inward graph direction and the others span the horizontal coordinates.
    """

    center: np.ndarray
    radius: float
    frame: np.ndarray
    graph_fn: Callable[[np.ndarray], np.ndarray]
    regularity: RegularitySpec
    closed_form: bool = True

    def __post_init__(self):
        gram = self.frame.T @ self.frame
        if not np.allclose(gram, np.eye(len(gram)), atol=1e-12, rtol=0):
            raise ValueError("patch frame is not orthonormal")
        if self.radius <= 0:
            raise ValueError("patch radius must be positive")
        g0 = float(np.asarray(self.graph_fn(np.zeros((1, self.dim - 1))))[0])
        if abs(g0) > 1e-9:
            raise ValueError(f"graph_fn(0) = {g0}, expected 0")

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    @property
    def direction(self) -> np.ndarray:
        return self.frame[:, -1]

    def to_local(self, points):
        loc = (np.atleast_2d(points) - self.center) @ self.frame
        return loc[:, :-1], loc[:, -1]

    def to_global(self, horiz, height):
        loc = np.column_stack([np.atleast_2d(horiz), np.atleast_1d(height)])
        return self.center + loc @ self.frame.T

    def height_above_graph(self, points):
        y, t = self.to_local(points)
        return t - self.graph_fn(y)


# ----------------------------------------------------------------------------
# boundary pieces


class BoundaryPiece:
    """A closed piece of the boundary given by a map from a parameter box.

    Subclasses supply ``point_fn``; pieces with a closed-form distance
    override ``exact_distance``.
    """

    lo: np.ndarray
    hi: np.ndarray

    @property
    def param_dim(self) -> int:
        return self.lo.size

    def point_fn(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def valid(self, params: np.ndarray) -> np.ndarray:
        return np.ones(len(params), dtype=bool)

    def exact_distance(self, points) -> Optional[np.ndarray]:
        return None

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        out = []
        need = m
        while need > 0:
            prm = self.lo + (self.hi - self.lo) * rng.random((2 * need + 8, self.param_dim))
            prm = prm[self.valid(prm)][:need]
            out.append(self.point_fn(prm))
            need -= len(prm)
        return np.concatenate(out)[:m]

    def distance(self, points, seed_per_axis: int = 33, maxiter: int = 200):
        ex = self.exact_distance(points)
        if ex is not None:
            return ex
        return _nelder_mead_distance(self, points, seed_per_axis, maxiter)


def _nelder_mead_distance(piece, points, seed_per_axis, maxiter):
    """Grid-seeded derivative-free minimization over the parameter box."""
    axes = [np.linspace(a, b, seed_per_axis) for a, b in zip(piece.lo, piece.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, piece.param_dim)
    grid = grid[piece.valid(grid)]
    gpts = piece.point_fn(grid)
    tree = cKDTree(gpts)
    out = np.empty(len(points))
    span = piece.hi - piece.lo
    for i, p in enumerate(np.atleast_2d(points)):
        _, k = tree.query(p)

        def obj(s):
            s = np.clip(s, piece.lo, piece.hi)
            if not piece.valid(s[None])[0]:
                return np.inf
            return float(np.sum((piece.point_fn(s[None])[0] - p) ** 2))

        res = minimize(obj, grid[k], method="Nelder-Mead",
                       options={"maxiter": maxiter * piece.param_dim,
                                "xatol": 1e-12 * max(span.max(), 1.0), "fatol": 1e-24,
                                "initial_simplex": grid[k] + np.vstack(
                                    [np.zeros(piece.param_dim),
                                     np.diag(span / (seed_per_axis - 1))])})
        if not res.success and res.nit >= maxiter * piece.param_dim:
            raise ConvergenceFailure(f"distance minimizer hit its budget at {p}")
        out[i] = np.sqrt(min(res.fun, obj(grid[k])))
    return out


class GraphPiece(BoundaryPiece):
    """The graph ``{x0 + F (s, g(s)) : lo <= s <= hi}`` of a one-variable function.

    Distances are found by a nearest-seed lookup on a curve sample clustered
    geometrically at ``singular`` parameters, followed by a vectorized
    golden-section refinement on the bracketing parameter interval.
    """

    def __init__(self, g, lo, hi, origin=(0.0, 0.0), frame=None,
                 singular: Sequence[float] = (), n_seeds: int = 4001,
                 golden_steps: int = 80):
        self.g = g
        self.lo = np.array([float(lo)])
        self.hi = np.array([float(hi)])
        self.origin = np.asarray(origin, dtype=float)
        self.frame = np.eye(2) if frame is None else np.asarray(frame, dtype=float)
        self.golden_steps = golden_steps
        s = [np.linspace(lo, hi, n_seeds)]
        for c in singular:
            geo = np.geomspace(1e-15, max(hi - lo, 1e-15), n_seeds)
            s.append(c + geo)
            s.append(c - geo)
            s.append([c])
        s = np.unique(np.concatenate(s))
        self.seeds = s[(s >= lo) & (s <= hi)]
        self.seed_points = self.point_fn(self.seeds[:, None])
        # compact, balanced nodes degrade badly on the near-collinear seed clusters
        self._tree = cKDTree(self.seed_points, compact_nodes=False, balanced_tree=False)

    def point_fn(self, params):
        s = np.asarray(params, dtype=float).reshape(-1)
        loc = np.column_stack([s, self.g(s)])
        return self.origin + loc @ self.frame.T

    def _d2(self, s, p):
        q = self.point_fn(s)
        return np.sum((q - p) ** 2, axis=1)

    def distance(self, points, seed_per_axis: int = 33, maxiter: int = 200):
        p = np.atleast_2d(points)
        _, k = self._tree.query(p)
        seeds = self.seeds
        a = seeds[np.maximum(k - 1, 0)].copy()
        b = seeds[np.minimum(k + 1, len(seeds) - 1)].copy()
        best = self._d2(seeds[k], p)
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc = self._d2(c, p)
        fd = self._d2(d, p)
        # converged points are retired every few steps so the tail runs on
        # the few points that sit very close to the curve
        idx = np.arange(len(p))
        step = 0
        while len(idx) and step < self.golden_steps:
            for _ in range(8):
                left = fc < fd
                b = np.where(left, d, b)
                a = np.where(left, a, c)
                x_new = np.where(left, b - GOLDEN * (b - a), a + GOLDEN * (b - a))
                f_new = self._d2(x_new, p)
                c, d = np.where(left, x_new, d), np.where(left, c, x_new)
                fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
            step += 8
            cur = np.minimum(fc, fd)
            best[idx] = np.minimum(best[idx], cur)
            tol = 4 * np.spacing(np.abs(a) + np.abs(b)) + 3e-9 * np.sqrt(cur)
            keep = np.abs(b - a) > tol
            idx, p, a, b, c, d, fc, fd = (v[keep] for v in (idx, p, a, b, c, d, fc, fd))
        return np.sqrt(best)


class SegmentPiece(BoundaryPiece):
    """Straight segment from ``a`` to ``b``."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.lo = np.array([0.0])
        self.hi = np.array([1.0])

    def point_fn(self, params):
        s = np.asarray(params, dtype=float).reshape(-1, 1)
        return self.a + s * (self.b - self.a)

    def exact_distance(self, points):
        p = np.atleast_2d(points)
        ab = self.b - self.a
        s = np.clip((p - self.a) @ ab / (ab @ ab), 0.0, 1.0)
        q = self.a + s[:, None] * ab
        return np.linalg.norm(p - q, axis=1)


def _sphere_point(angles):
    """Hyperspherical angles (N, d-1) -> unit vectors (N, d)."""
    angles = np.atleast_2d(angles)
    m, k = angles.shape
    out = np.ones((m, k + 1))
    for i in range(k):
        out[:, i] *= np.cos(angles[:, i])
        out[:, i + 1:] *= np.sin(angles[:, i])[:, None]
    return out


class SpherePiece(BoundaryPiece):
    """The sphere of radius ``R`` about the origin in R^d."""

    def __init__(self, d: int, R: float = 1.0):
        self.d = d
        self.R = R
        self.lo = np.zeros(d - 1)
        self.hi = np.full(d - 1, np.pi)
        self.hi[-1] = 2 * np.pi

    def point_fn(self, params):
        return self.R * _sphere_point(params)

    def exact_distance(self, points):
        return np.abs(np.linalg.norm(np.atleast_2d(points), axis=1) - self.R)

    def sample(self, m, rng):
        v = rng.standard_normal((m, self.d))
        return self.R * v / np.linalg.norm(v, axis=1, keepdims=True)


class PolydiscFace(BoundaryPiece):
    """Face ``{|z_k| = 1, |z_m| <= 1 (m != k)}`` of the unit polydisc."""

    def __init__(self, n: int, k: int):
        self.n = n
        self.k = k
        # theta_k, then (rho, phi) for every other coordinate
        self.lo = np.zeros(1 + 2 * (n - 1))
        self.hi = np.array([2 * np.pi] + [1.0, 2 * np.pi] * (n - 1))

    def point_fn(self, params):
        prm = np.atleast_2d(params)
        z = np.empty((len(prm), self.n), dtype=complex)
        z[:, self.k] = np.exp(1j * prm[:, 0])
        others = [m for m in range(self.n) if m != self.k]
        for i, m in enumerate(others):
            z[:, m] = prm[:, 1 + 2 * i] * np.exp(1j * prm[:, 2 + 2 * i])
        return to_real(z)

    def exact_distance(self, points):
        z = to_complex(points)
        a = np.abs(z)
        d2 = (a[:, self.k] - 1.0) ** 2
        for m in range(self.n):
            if m != self.k:
                d2 = d2 + np.maximum(a[:, m] - 1.0, 0.0) ** 2
        return np.sqrt(d2)

    def sample(self, m, rng):
        z = np.empty((m, self.n), dtype=complex)
        for j in range(self.n):
            if j == self.k:
                z[:, j] = np.exp(2j * np.pi * rng.random(m))
            else:
                z[:, j] = np.sqrt(rng.random(m)) * np.exp(2j * np.pi * rng.random(m))
        return to_real(z)


# ----------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class BoundedDomain:
    name: str
    dimension: int
    atlas: tuple
    membership: Callable[[np.ndarray], np.ndarray]
    diameter: float
    pieces: tuple
    bbox: tuple
    regularity: Optional[RegularitySpec] = None
    params: dict = field(default_factory=dict)
    probe_only: bool = False
    # probe mode: (direction, t values) -> candidate closure points near the probe
    probe_points: Optional[Callable] = None
    probe_center: Optional[np.ndarray] = None

    @property
    def real_dim(self) -> int:
        return 2 * self.dimension

    @property
    def eps_w(self) -> float:
        return min(p.radius for p in self.atlas)

    @property
    def eps1(self) -> float:
        return min(self.eps_w / 2.0, 0.1)

    def contains(self, points) -> np.ndarray:
        return np.asarray(self.membership(np.atleast_2d(points)), dtype=bool)

    def raw_distance(self, points) -> np.ndarray:
        """Distance to the boundary pieces, without a membership check."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.pieces:
            raise PointOutsideDomain(f"{self.name} has no boundary description")
        return np.min(np.stack([pc.distance(p) for pc in self.pieces]), axis=0)

    def gain(self, eps):
        return self.regularity.gain_fn(eps)


def distance_to_boundary(domain: BoundedDomain, z) -> np.ndarray:
    """delta(z, boundary) for points inside the domain.

    Accepts a single point or an ``(N, 2n)`` array; returns a float or an
    array accordingly.
    """
    p = np.atleast_2d(np.asarray(z, dtype=float))
    inside = domain.contains(p)
    if not inside.all():
        raise PointOutsideDomain(f"point(s) outside {domain.name}: {p[~inside][:3]}")
    d = domain.raw_distance(p)
    return float(d[0]) if np.ndim(z) == 1 else d


def dense_boundary_distance(domain: BoundedDomain, points, samples: int = 10 ** 6,
                            refine_samples: int = 10 ** 4, refinements: Optional[int] = None):
    """Brute-force oracle: nearest of a dense parameter-grid sample, then refined.

    Each boundary piece is sampled on a uniform grid of ``samples`` parameter
    values; around the best sample a finer grid of ``refine_samples`` values
    spanning two cells either way is evaluated, ``refinements`` times
    (default twice for curves, eight times for higher-dimensional pieces,
    where each round shrinks the cell far less).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(pts), np.inf)
    for piece in domain.pieces:
        dim = piece.param_dim
        m = max(int(round(samples ** (1.0 / dim))), 3)
        grid, tree = _dense_cache(piece, m)
        step = (piece.hi - piece.lo) / (m - 1)
        mr = max(int(round(refine_samples ** (1.0 / dim))), 5)
        for i, p in enumerate(pts):
            d, k = tree.query(p)
            s0 = grid[k]
            h = step
            val = d * d
            rounds = refinements if refinements is not None else (2 if dim == 1 else 8)
            for _ in range(rounds):
                lo = np.maximum(s0 - 2 * h, piece.lo)
                hi = np.minimum(s0 + 2 * h, piece.hi)
                axes = [np.linspace(a, b, mr) for a, b in zip(lo, hi)]
                loc = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)
                loc = loc[piece.valid(loc)]
                if len(loc) == 0:
                    break
                d2 = np.sum((piece.point_fn(loc) - p) ** 2, axis=1)
                j = int(np.argmin(d2))
                if d2[j] < val:
                    val = d2[j]
                    s0 = loc[j]
                h = (hi - lo) / (mr - 1)
            best[i] = min(best[i], np.sqrt(val))
    return best


_DENSE = {}


def _dense_cache(piece, m):
    key = (id(piece), m)
    if key not in _DENSE:
        axes = [np.linspace(a, b, m) for a, b in zip(piece.lo, piece.hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, piece.param_dim)
        grid = grid[piece.valid(grid)]
        _DENSE[key] = (grid, cKDTree(piece.point_fn(grid)), piece)
    grid, tree, _ = _DENSE[key]
    return grid, tree


def sample_interior(domain: BoundedDomain, m: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bbox)
    out = []
    need = m
    while need > 0:
        cand = lo + (hi - lo) * rng.random((4 * need + 16, lo.size))
        cand = cand[domain.contains(cand)][:need]
        out.append(cand)
        need -= len(cand)
    return np.concatenate(out)[:m]


def sample_boundary(domain: BoundedDomain, m: int, rng: np.random.Generator) -> np.ndarray:
    """Boundary points, split across pieces in proportion to their sampled size."""
    sizes = []
    for pc in domain.pieces:
        q = pc.sample(256, np.random.default_rng(0))
        sizes.append(np.ptp(q, axis=0).sum() + 1e-12)
    sizes = np.asarray(sizes)
    counts = np.floor(m * sizes / sizes.sum()).astype(int)
    counts[np.argmax(sizes)] += m - counts.sum()
    return np.concatenate([pc.sample(c, rng) for pc, c in zip(domain.pieces, counts) if c > 0])
