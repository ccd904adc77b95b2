"""Dispatch of configured operations to the library, producing run reports.

``run`` returns ``(report, timings, series)``: the report is deterministic
given the config, timings are wall-clock milliseconds per check, and series
is an optional ``(header, rows)`` table for CSV output.
"""
from __future__ import annotations

import csv
import math
import time
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .acceptance import run_acceptance
from .catalog import get_domain
from .checks import build_cover, check_segment_property, check_translation_estimate, verify_domain
from .config import ExperimentConfig
from .errors import ConfigError, PshlabError
from .exhaustion import (ExhaustionConfig, boundary_ray, build_exhaustion,
                         check_bounds, check_levi_floor, check_ray, lower_bound,
                         near_boundary_samples, upper_bound)
from .geometry import BoundedDomain, sample_interior
from .mergelyan import (approximant_psh_check, build_approximant, build_cutoffs,
                        certify_neighborhood, check_boundary_crossing, check_uniform_error,
                        closure_samples)
from .psh import TEST_FIELDS, catalog_field
from .report import jsonable
from .special import GainFunction, cusp_profile, gain_table

Series = Optional[Tuple[List[str], List[list]]]

_COVERS: Dict[tuple, object] = {}


def _domain(cfg: ExperimentConfig) -> BoundedDomain:
    return get_domain(cfg.domain["name"], **cfg.domain_params())


def _cover(cfg: ExperimentConfig, dom: BoundedDomain):
    key = (cfg.domain["name"], tuple(sorted(cfg.domain_params().items())), cfg.seed)
    if key not in _COVERS:
        _COVERS[key] = build_cover(dom, np.random.default_rng([cfg.seed, 100]))
    return _COVERS[key]


def _field(cfg: ExperimentConfig, dom: BoundedDomain):
    name = cfg.field["name"]
    if name not in TEST_FIELDS:
        raise ConfigError(f"unknown field {name!r}; known: {sorted(TEST_FIELDS)}")
    return catalog_field(name, dom)


def _check(name: str, verdict: bool, measured: dict, bound: Optional[dict] = None,
           fitted: Optional[dict] = None) -> dict:
    return {"name": name, "verdict": bool(verdict), "measured": measured, "bound": bound or {},
            "fitted_constants": fitted or {}}


def _rng(cfg: ExperimentConfig, tag: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, tag])


# -- domain -------------------------------------------------------------------

def op_domain_verify(cfg):
    dom = _domain(cfg)
    rep = verify_domain(dom, _rng(cfg, 1))
    return [_check("domain.verify", rep["passes"], rep)], None


def op_segment_check(cfg):
    dom = _domain(cfg)
    rep = check_segment_property(dom, boundary_samples=cfg.numeric["boundary_samples"], rng=_rng(cfg, 2))
    return [_check("domain.segment_check", rep["passes"], rep)], None


def _patch_samples(dom, j, m, rng):
    patch = dom.atlas[j]
    out = []
    for _ in range(100):
        c = patch.center + rng.uniform(-1, 1, (8 * m, dom.real_dim)) * patch.radius / 2
        keep = (np.linalg.norm(c - patch.center, axis=1) < patch.radius / 2) & dom.contains(c)
        out.extend(c[keep])
        if len(out) >= m:
            break
    return np.array(out[:m])


def op_translation_check(cfg):
    dom = _domain(cfg)
    if not dom.atlas:
        raise ConfigError(f"domain {dom.name!r} has no atlas to check")
    rng = _rng(cfg, 3)
    eps = np.logspace(-6, math.log10(0.9 * dom.eps1), cfg.numeric["eps_points"])
    fitted, bad, rows = [], 0, []
    for j in range(len(dom.atlas)):
        z = _patch_samples(dom, j, cfg.numeric["points_per_patch"], rng)
        if not len(z):
            continue
        rep = check_translation_estimate(dom, j, z, eps)
        fitted.append(rep["fitted_constant"])
        bad += len(rep["violations"])
        rows.append([j, rep["fitted_constant"], int(rep["holds"])])
    c_fit = float(min(fitted))
    meas = {"patches": len(fitted), "violations": bad, "per_patch_min": c_fit}
    return ([_check("domain.translation_check", bad == 0 and c_fit > 0, meas, fitted={"c_fit": c_fit})],
            (["patch", "fitted_constant", "holds"], rows))


# -- special functions ----------------------------------------------------------

def _gain(cfg) -> GainFunction:
    s = cfg.special
    try:
        return GainFunction(s["form"], C=s["C"], C_tilde=s["C_tilde"], exponent=s["exponent"],
                            eps1=s["eps1"])
    except PshlabError as exc:
        raise ConfigError(f"special: {exc}") from None


def op_special_table(cfg):
    f = _gain(cfg)
    s = cfg.special
    hi = min(s["eps_max"], float(np.nextafter(f.upper, 0.0)))
    if not s["eps_min"] < hi:
        raise ConfigError("special.eps_min must be below special.eps_max and the gain's range")
    eps = np.logspace(math.log10(s["eps_min"]), math.log10(hi), s["rows"])
    tab = gain_table(f, eps)
    meas = {"form": f.form, "rows": len(tab), "omega_min": float(tab[:, 2].min()),
            "omega_max": float(tab[:, 2].max())}
    return ([_check("special_fn.table", bool(np.all(np.isfinite(tab))), meas)],
            (["eps", "f", "omega"], tab.tolist()))


# -- Mergelyan ------------------------------------------------------------------

def _approximant(cfg):
    dom = _domain(cfg)
    cover = _cover(cfg, dom)
    art = build_approximant(dom, _field(cfg, dom), cfg.numeric["nu"], cover=cover,
                            cutoffs=build_cutoffs(cover), rng=_rng(cfg, 4))
    return dom, cover, art


def op_approx_build(cfg):
    dom, cover, art = _approximant(cfg)
    meas = {"domain": dom.name, "field": art.phi.label, "nu": art.nu, "omega_nu": art.omega_nu,
            "omega_source": art.omega_source, "curvature_c": art.c, "pieces": art.size,
            "cover": {k: v for k, v in cover.stats.items() if k != "dB_samples"}}
    return [_check("approx.build", True, meas)], None


def op_approx_check(cfg):
    dom, cover, art = _approximant(cfg)
    rng = _rng(cfg, 5)
    pts = closure_samples(dom, cfg.numeric["samples"], rng)
    err = check_uniform_error(art, pts)
    f_nu = float(dom.regularity.gain_fn(art.nu))
    margin = certify_neighborhood(art, rng=rng)
    cross = check_boundary_crossing(art, rng=rng)
    psh = approximant_psh_check(art, m=cfg.numeric["psh_points"], rng=rng)
    checks = [
        _check("approx.uniform_error", err["holds"], err, {"bound": err["bound"]},
               {"C_fit": err["C_fit"]}),
        _check("approx.neighborhood", margin is not None and margin >= f_nu,
               {"margin": margin}, {"f_nu": f_nu}),
        _check("approx.boundary_crossing", cross["holds"],
               {k: v for k, v in cross.items() if k != "witnesses"}),
        _check("approx.psh", psh["verdict"], {k: v for k, v in psh.items() if k != "witnesses"}),
    ]
    return checks, None


# -- exhaustion -----------------------------------------------------------------

_EXH: Dict[tuple, object] = {}


def _exhaustion(cfg):
    dom = _domain(cfg)
    e = cfg.exhaustion
    conf = ExhaustionConfig(eps0=e["eps0"], rho=e["rho"], grid_floor=e["grid_floor"],
                            gamma=e["gamma"], lambda_constant=e["lambda_constant"])
    key = (dom.name, tuple(sorted(cfg.domain_params().items())), conf, cfg.seed)
    if key not in _EXH:
        try:
            _EXH[key] = build_exhaustion(dom, conf, rng=_rng(cfg, 6))
        except ValueError as exc:
            raise ConfigError(f"exhaustion: {exc}") from None
    return _EXH[key]


def op_exhaustion_build(cfg):
    art = _exhaustion(cfg)
    meas = {"domain": art.domain.name, "eps0": art.eps0, "grid_size": len(art.grid),
            "grid_floor": float(art.grid[-1]), "gamma": art.gamma,
            "lambda_constant": art.lambda_constant, "patches": len(art.centers),
            "stats": art.stats}
    return [_check("exhaustion.build", True, meas)], None


def _read_points(path: Optional[str], dim: int) -> np.ndarray:
    if path is None:
        raise ConfigError("exhaustion.points_file is required for exhaustion eval")
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError(f"cannot read points file {path}: {exc}") from None
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        pts = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ConfigError(f"{path}: expected {dim} real coordinates per row")
    return pts


def op_exhaustion_eval(cfg):
    art = _exhaustion(cfg)
    pts = _read_points(cfg.exhaustion["points_file"], art.domain.real_dim)
    w = art.evaluate(pts)
    inside = art.domain.contains(pts)
    delta = np.where(inside, art.domain.raw_distance(pts), 0.0)
    rows = [list(p) + [d, v] for p, d, v in zip(pts.tolist(), delta, w)]
    head = [f"x{i // 2 + 1}" if i % 2 == 0 else f"y{i // 2 + 1}" for i in range(art.domain.real_dim)]
    meas = {"points": len(pts), "inside": int(inside.sum()), "max_w_inside": float(w[inside].max()) if inside.any() else None}
    return ([_check("exhaustion.eval", bool(np.all(w[inside] < 0)), meas)],
            (head + ["delta", "w"], rows))


def op_exhaustion_bounds(cfg):
    art = _exhaustion(cfg)
    pts = sample_interior(art.domain, cfg.numeric["samples"], _rng(cfg, 7))
    b = check_bounds(art, pts)
    ks = range(cfg.numeric["ray_k_min"], cfg.numeric["ray_k_max"] + 1)
    ray = check_ray(art, ks, C1=b["C1"])
    ok = b["negative"] and b["lower_ok"] and b["upper_ok"] is not False and b["C1"] > 0
    checks = [
        _check("exhaustion.bounds", ok, b, {"eps0": art.eps0}, {"C1": b["C1"]}),
        _check("exhaustion.ray", ray["holds"], ray),
    ]
    rows = [[r[1], r[2], r[3], r[4]] for r in art.bound_records]
    return checks, (["delta", "lower", "w", "upper"], rows)


def op_exhaustion_levi(cfg):
    art = _exhaustion(cfg)
    rng = _rng(cfg, 8)
    h = cfg.numeric["h"]
    samples = near_boundary_samples(art, cfg.numeric["levi_samples"], rng,
                                    delta_range=(max(1e-3, 10 * h), None))
    rep = check_levi_floor(art, samples, h=h)
    return [_check("exhaustion.levi_floor", rep["passes"], rep, {"fraction": 0.8},
                   {"C": rep["fitted_C"]})], None


def op_exhaustion_trace(cfg):
    art = _exhaustion(cfg)
    p = cfg.exhaustion["point"]
    if p is None:
        rng = _rng(cfg, 9)
        z = near_boundary_samples(art, 1, rng)
    else:
        z = np.atleast_2d(np.asarray(p, dtype=float))
        if z.shape[1] != art.domain.real_dim:
            raise ConfigError(f"exhaustion.point needs {art.domain.real_dim} coordinates")
        if not art.domain.contains(z)[0]:
            raise ConfigError("exhaustion.point lies outside the domain")
    E, W, B, delta = art.trace(z)
    order = np.argsort(-E[0], kind="stable")
    k = int(np.argmax(W[0]))
    eps_star = float(E[0, k])
    at_floor = eps_star <= float(art.grid[-1]) and eps_star < delta[0]
    meas = {"point": z[0].tolist(), "delta": float(delta[0]), "eps_star": eps_star,
            "branch": int(B[0, k]), "at_floor": at_floor, "eps_star_over_delta": eps_star / float(delta[0])}
    rows = [[E[0, i], W[0, i], int(B[0, i])] for i in order]
    return [_check("exhaustion.trace", not at_floor, meas)], (["eps", "w_eps", "branch"], rows)


# -- figures --------------------------------------------------------------------

def op_fig_cusp(cfg):
    x = np.linspace(-0.5, 0.5, 2001)
    y = cusp_profile(x)
    return [_check("figures.cusp_fig1", bool(np.all(np.isfinite(y))), {"rows": len(x)})], \
        (["x", "y"], np.column_stack([x, y]).tolist())


def op_fig_profile(cfg):
    art = _exhaustion(cfg)
    ks = range(cfg.numeric["ray_k_min"], cfg.numeric["ray_k_max"] + 1)
    pts = boundary_ray(art, ks)
    w = art.evaluate(pts)
    delta = art.domain.raw_distance(pts)
    C1 = check_bounds(art, sample_interior(art.domain, cfg.numeric["samples"], _rng(cfg, 7)))["C1"]
    lo = lower_bound(art, delta, C1)
    up = upper_bound(art, delta)
    rows = np.column_stack([delta, lo, w, up]).tolist()
    return [_check("figures.exhaustion_profile", bool(np.all(np.diff(w) > 0)),
                   {"rows": len(rows)}, fitted={"C1": C1})], (["delta", "lower", "w", "upper"], rows)


def op_fig_error(cfg):
    dom = _domain(cfg)
    cover = _cover(cfg, dom)
    cut = build_cutoffs(cover)
    phi = _field(cfg, dom)
    pts = closure_samples(dom, cfg.numeric["samples"], _rng(cfg, 11))
    rows = []
    nu0 = cfg.numeric["nu"]
    for k in range(cfg.numeric["nu_halvings"] + 1):
        nu = nu0 * 2.0 ** -k
        art = build_approximant(dom, phi, nu, cover=cover, cutoffs=cut, rng=_rng(cfg, 12 + k))
        e = check_uniform_error(art, pts)
        rows.append([nu, e["sup_error"], e["bound"]])
    bounds = [r[2] for r in rows]
    ok = all(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:]))
    return [_check("figures.error_vs_nu", ok, {"rows": len(rows)})], (["nu", "sup_error", "bound"], rows)


# -- acceptance -----------------------------------------------------------------

def op_acceptance(cfg):
    rep, timings = run_acceptance(cfg.seed, cfg.numeric["criteria"])
    return rep["checks"], None, timings


OPS: Dict[str, Callable] = {
    "acceptance": op_acceptance,
    "domain.verify": op_domain_verify,
    "domain.segment-check": op_segment_check,
    "domain.translation-check": op_translation_check,
    "special-fn.table": op_special_table,
    "approx.build": op_approx_build,
    "approx.check": op_approx_check,
    "exhaustion.build": op_exhaustion_build,
    "exhaustion.eval": op_exhaustion_eval,
    "exhaustion.check-bounds": op_exhaustion_bounds,
    "exhaustion.check-levi": op_exhaustion_levi,
    "exhaustion.trace": op_exhaustion_trace,
    "figures.cusp_fig1": op_fig_cusp,
    "figures.exhaustion_profile": op_fig_profile,
    "figures.error_vs_nu": op_fig_error,
}


def run(cfg: ExperimentConfig):
    """Execute the configured operation; returns (report, timings_ms, series)."""
    t = time.perf_counter()
    out = OPS[cfg.operation](cfg)
    if len(out) == 3:
        checks, series, timings = out
    else:
        checks, series = out
        timings = {}
    checks = sorted((jsonable(c) for c in checks), key=lambda c: (c.get("criterion", 0), c["name"]))
    if not timings:
        timings = {c["name"]: 1e3 * (time.perf_counter() - t) for c in checks}
    report = {"config": cfg.echo(), "checks": checks,
              "verdict": all(c["verdict"] for c in checks)}
    return report, timings, series
