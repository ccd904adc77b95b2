"""Named catalog of test domains with boundary atlases.

Graph domains in C^1 are "caps" ``{|x| < a, g(x) < y < H}`` over an even
profile ``g`` with ``g(0) = 0``; the tip of the profile sits at the origin.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError
from .geometry import (BoundedDomain, GraphPatch, GraphPiece, PolydiscFace, RegularitySpec,
                       SegmentPiece, SpherePiece, complete_frame, to_complex, to_real)
from .special import GainFunction, cusp_graph


def membership_graph(membership, center, frame, radius, scan: int = 96, steps: int = 64):
    """Graph function of a patch recovered from the membership test.

    For each horizontal coordinate the vertical line is scanned over
    ``[-6r, 6r]``; the first inside scan point is refined against the
    preceding outside one by bisection. Lines with no inside point give +inf.
    """
    T = 6.0 * radius
    tgrid = np.linspace(-T, T, scan)

    def fn(y):
        y = np.atleast_2d(y)
        m = len(y)
        base = center + y @ frame[:, :-1].T
        w = frame[:, -1]
        inside = np.empty((m, scan), dtype=bool)
        for k, t in enumerate(tgrid):
            inside[:, k] = membership(base + t * w)
        any_in = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        out = np.full(m, np.inf)
        ok = any_in & (first > 0)
        out[any_in & (first == 0)] = -T
        lo = tgrid[np.maximum(first - 1, 0)][ok]
        hi = tgrid[first][ok]
        b = base[ok]
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            ins = membership(b + mid[:, None] * w)
            hi = np.where(ins, mid, hi)
            lo = np.where(ins, lo, mid)
        out[ok] = hi
        return out

    return fn


def _greedy_centers(points, r):
    tree = cKDTree(points)
    covered = np.zeros(len(points), dtype=bool)
    centers = []
    for i in range(len(points)):
        if covered[i]:
            continue
        centers.append(points[i])
        covered[tree.query_ball_point(points[i], r)] = True
    return np.array(centers)


# ----------------------------------------------------------------------------
# ball


def unit_ball(n: int = 1, patches: int = 16, radius: float = 0.2, seed: int = 0) -> BoundedDomain:
    """Unit ball in C^n.

    For n = 1 the atlas has ``patches`` equally spaced centers; otherwise the
    centers are a greedy cover of a boundary sample at spacing ``0.8 radius``.
    """
    d = 2 * n
    if n == 1:
        th = 2 * np.pi * np.arange(patches) / patches
        centers = np.column_stack([np.cos(th), np.sin(th)])
        r = 1.1 * 2 * math.sin(math.pi / (2 * patches))
    else:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((20000 * n, d))
        centers = _greedy_centers(v / np.linalg.norm(v, axis=1, keepdims=True), 0.8 * radius)
        r = radius
    gain = GainFunction("lipschitz", C=1.25, eps1=min(r / 2, 0.1))
    reg = RegularitySpec("lipschitz", norm=1.0 / math.sqrt(1 - min(16 * r * r, 0.99)),
                         gain_fn=gain)

    def sphere_graph(y):
        q = np.sum(np.atleast_2d(y) ** 2, axis=1)
        out = np.full(len(q), np.inf)
        ok = q < 1.0
        out[ok] = 1.0 - np.sqrt(1.0 - q[ok])
        return out

    atlas = tuple(GraphPatch(center=c, radius=r, frame=complete_frame(-c), graph_fn=sphere_graph,
                             regularity=reg) for c in centers)
    return BoundedDomain(
        name="ball", dimension=n, atlas=atlas,
        membership=lambda p: np.sum(np.atleast_2d(p) ** 2, axis=1) < 1.0,
        diameter=2.0, pieces=(SpherePiece(d),), bbox=(-np.ones(d), np.ones(d)),
        regularity=reg, params={"n": n, "patches": len(atlas)})


# ----------------------------------------------------------------------------
# polydisc


def polydisc(n: int = 2, radius: float = 0.25, seed: int = 0) -> BoundedDomain:
    d = 2 * n

    def member(p):
        return np.max(np.abs(to_complex(p)), axis=1) < 1.0

    faces = tuple(PolydiscFace(n, k) for k in range(n))
    rng = np.random.default_rng(seed)
    samp = np.concatenate([f.sample(20000 * n, rng) for f in faces])
    centers = _greedy_centers(samp, 0.8 * radius)
    gain = GainFunction("lipschitz", C=2.0, eps1=min(radius / 2, 0.1))
    reg = RegularitySpec("lipschitz", norm=16.0, gain_fn=gain)
    atlas = []
    for c in centers:
        fr = complete_frame(-c)
        atlas.append(GraphPatch(center=c, radius=radius, frame=fr,
                                graph_fn=membership_graph(member, c, fr, radius),
                                regularity=reg, closed_form=False))
    return BoundedDomain(
        name="polydisc", dimension=n, atlas=tuple(atlas), membership=member,
        diameter=2.0 * math.sqrt(n), pieces=faces, bbox=(-np.ones(d), np.ones(d)),
        regularity=reg, params={"n": n, "patches": len(atlas)})


# ----------------------------------------------------------------------------
# caps over an even profile


@dataclass(frozen=True)
class CapShape:
    g: Callable
    a: float
    H: float
    singular: tuple = (0.0,)


def _arclength_nodes(pts, spacing):
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    k = max(int(math.ceil(s[-1] / spacing)), 1)
    targets = np.linspace(0.0, s[-1], k + 1)
    return np.column_stack([np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])])


def cap_domain(name: str, shape: CapShape, radius: float, regularity: RegularitySpec,
               extra: dict) -> BoundedDomain:
    g, a, H = shape.g, shape.a, shape.H
    ga = float(g(np.array([a]))[0])
    if H - ga <= 8.4 * radius:
        raise ConfigError(f"{name}: side length {H - ga:.3g} too short for patch radius {radius}")

    def member(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        inside = (np.abs(x) < a) & (y < H)
        gx = np.full(len(x), np.inf)
        gx[inside] = g(x[inside])
        return inside & (y > gx)

    corners = np.array([[a, ga], [a, H], [-a, H], [-a, ga]])
    graph_piece = GraphPiece(g, -a, a, singular=shape.singular)
    pieces = (graph_piece, SegmentPiece(corners[0], corners[1]),
              SegmentPiece(corners[1], corners[2]), SegmentPiece(corners[2], corners[3]))

    def unit(v):
        v = np.asarray(v, dtype=float)
        return v / np.linalg.norm(v)

    # interior bisector at each corner from the two edge directions leaving it
    h = 1e-7
    slope = (g(np.array([a]))[0] - g(np.array([a - h]))[0]) / h
    tang_graph_right = unit([-1.0, -slope])
    tang_graph_left = unit([1.0, -slope])
    bis = [unit(tang_graph_right + np.array([0.0, 1.0])),
           unit(np.array([0.0, -1.0]) + np.array([-1.0, 0.0])),
           unit(np.array([0.0, -1.0]) + np.array([1.0, 0.0])),
           unit(tang_graph_left + np.array([0.0, 1.0]))]

    spacing = radius / 3.0
    xs = np.linspace(0.0, a, 20001)
    right = _arclength_nodes(np.column_stack([xs, g(xs)]), spacing)
    left = right[1:] * np.array([-1.0, 1.0])
    centers = [right[0]]
    kinds = ["graph"]
    for p in right[1:]:
        centers.append(p)
        kinds.append("graph")
    for p in left:
        centers.append(p)
        kinds.append("graph")
    normals = {1: np.array([-1.0, 0.0]), 2: np.array([0.0, -1.0]), 3: np.array([1.0, 0.0])}
    for k in (1, 2, 3):
        nodes = _arclength_nodes(corners[k - 1:k + 1], spacing)[1:-1]
        for p in nodes:
            centers.append(p)
            kinds.append(k)
    for i in range(4):
        centers.append(corners[i])
        kinds.append("corner")

    atlas = []
    for c, kind in zip(centers, kinds):
        c = np.asarray(c, dtype=float)
        dc = np.linalg.norm(corners - c, axis=1)
        near = int(np.argmin(dc))
        if dc[near] <= 4.2 * radius:
            fr = complete_frame(bis[near])
            atlas.append(GraphPatch(center=c, radius=radius, frame=fr,
                                    graph_fn=membership_graph(member, c, fr, radius),
                                    regularity=regularity, closed_form=False))
        elif kind == "graph":
            xc, yc = float(c[0]), float(g(np.array([c[0]]))[0])
            c = np.array([xc, yc])
            atlas.append(GraphPatch(
                center=c, radius=radius, frame=np.eye(2),
                graph_fn=(lambda y, xc=xc, yc=yc: g(xc + np.atleast_2d(y)[:, 0]) - yc),
                regularity=regularity))
        else:
            wdir = normals[kind]
            atlas.append(GraphPatch(center=c, radius=radius, frame=complete_frame(wdir),
                                    graph_fn=lambda y: np.zeros(len(np.atleast_2d(y))),
                                    regularity=regularity))
    width = 2 * a
    height = H
    return BoundedDomain(
        name=name, dimension=1, atlas=tuple(atlas), membership=member,
        diameter=math.hypot(width, height), pieces=pieces,
        bbox=(np.array([-a, 0.0]), np.array([a, H])), regularity=regularity,
        params=dict(extra, a=a, H=H, radius=radius, patches=len(atlas)))


def cone_domain(C: float = 1.0, a: float = 0.5, H: float = 1.1, radius: float = 0.06):
    """Wedge over the graph C|x| (the n = 1 cone)."""
    g = lambda x: C * np.abs(np.asarray(x, dtype=float))
    gain = GainFunction("lipschitz", C=1.5 * math.sqrt(1 + C * C), eps1=min(radius / 2, 0.1))
    reg = RegularitySpec("lipschitz", norm=max(C, 1.0) * 3.0, gain_fn=gain)
    return cap_domain("cone", CapShape(g, a, H), radius, reg, {"C": C})


def hoelder_cusp(C: float = 1.0, gamma: float = 0.5, a: float = 0.5, H: float = 1.3,
                 radius: float = 0.06):
    """Cap over C|x|^gamma."""
    g = lambda x: C * np.abs(np.asarray(x, dtype=float)) ** gamma
    gain = GainFunction("hoelder", C=C, exponent=gamma, eps1=min(radius / 2, 0.1))
    reg = RegularitySpec("hoelder", norm=3.0 * C, gain_fn=gain, exponent=gamma)
    return cap_domain("hoelder", CapShape(g, a, H), radius, reg, {"C": C, "gamma": gamma})


def loglip_cusp(a: float = 0.5, H: float = 1.0, radius: float = 0.06, C: float = 1.0,
                C_tilde: float = 1.0):
    """Cap over |x| W0(1/|x|), the Log-Lipschitz cusp with its tip at the origin."""
    gain = GainFunction("loglip", C=C, C_tilde=C_tilde, eps1=min(radius / 2, 0.1))
    reg = RegularitySpec("loglip", norm=3.0, gain_fn=gain)
    return cap_domain("loglip", CapShape(cusp_graph, a, H), radius, reg,
                      {"C": C, "C_tilde": C_tilde})


def hartogs_triangle() -> BoundedDomain:
    """{|z1| < |z2| < 1}; membership only, no atlas at the origin."""

    def member(p):
        z = to_complex(p)
        a1, a2 = np.abs(z[:, 0]), np.abs(z[:, 1])
        return (a1 < a2) & (a2 < 1.0)

    def reflected(w, t):
        # closure points (t|w2| e^{i th}, -t w2): |z1| = |z2|, and the
        # translate by t w lands on {z2 = 0}, outside the triangle
        wc = to_complex(w)[0]
        th = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)
        tt, hh = np.meshgrid(np.asarray(t, dtype=float), th, indexing="ij")
        tt, hh = tt.ravel(), hh.ravel()
        z = np.column_stack([tt * abs(wc[1]) * np.exp(1j * hh), -tt * wc[1]])
        return to_real(z)

    return BoundedDomain(name="hartogs", dimension=2, atlas=(), membership=member,
                         diameter=2.0 * math.sqrt(2.0), pieces=(),
                         bbox=(-np.ones(4), np.ones(4)), probe_only=True,
                         probe_points=reflected, probe_center=np.zeros(4))


CATALOG = {
    "ball": unit_ball,
    "polydisc": polydisc,
    "cone": cone_domain,
    "hoelder": hoelder_cusp,
    "loglip": loglip_cusp,
    "hartogs": hartogs_triangle,
}

_CACHE = {}
_CACHE_LOCK = threading.RLock()


def get_domain(name: str, **params) -> BoundedDomain:
    """Build (and memoize) a catalog domain by name."""
    if name not in CATALOG:
        raise ConfigError(f"unknown domain {name!r}; known: {sorted(CATALOG)}")
    key = (name, tuple(sorted(params.items())))
    with _CACHE_LOCK:
        if key not in _CACHE:
            try:
                _CACHE[key] = CATALOG[name](**params)
            except TypeError as exc:
                raise ConfigError(f"bad parameters for domain {name!r}: {exc}") from None
        return _CACHE[key]


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()
