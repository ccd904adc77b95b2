"""The acceptance suite: one record per criterion, deterministic given the seed.

Each criterion function takes a seeded generator and returns a record
``{name, verdict, measured, bound, fitted_constants}``. Wall-clock times are
kept out of the record so that two runs serialize to identical bytes; the
runner returns them separately.
"""
from __future__ import annotations

import hashlib
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np

from . import special
from .catalog import clear_cache, get_domain
from .checks import build_cover, check_segment_property, check_translation_estimate
from .exhaustion import (ExhaustionConfig, build_exhaustion, check_attainment, check_bounds,
                         check_levi_floor, check_ray, near_boundary_samples)
from .geometry import dense_boundary_distance, sample_interior
from .mergelyan import (approximant_psh_check, build_approximant, build_cutoffs,
                        certify_neighborhood, check_uniform_error, closure_samples)
from .psh import ScalarField, catalog_field, levi_convergence
from .report import dumps, jsonable

MERGELYAN_DOMAINS = ("ball", "cone", "loglip")
MERGELYAN_FIELDS = ("const", "re_z1", "norm2")
SEGMENT_DOMAINS = ("ball", "polydisc", "cone", "hoelder", "loglip")
NU = 1e-3


def _record(name: str, verdict: bool, measured: dict, bound: dict, fitted: Optional[dict] = None):
    return {"name": name, "verdict": bool(verdict), "measured": measured, "bound": bound,
            "fitted_constants": fitted or {}}


def criterion_1(rng: np.random.Generator) -> dict:
    """Lambert W round trip on both real branches and the branch point."""
    e = 1.0 / math.e
    xs0 = np.concatenate([np.logspace(-300, 300, 500), -e * np.logspace(-300, 0, 500)])
    xs1 = -e * np.logspace(-300, 0, 1000)
    worst = {}
    for br, xs in ((0, xs0), (-1, xs1)):
        w = special.lambert_w(br, xs)
        res = np.abs(w * np.exp(w) - xs)
        err = np.where(np.abs(xs) <= 1, res, res / np.abs(xs))
        worst[f"W{br}"] = float(err.max())
    bp = (special.lambert_w(0, -e), special.lambert_w(-1, -e))
    bp_err = max(abs(bp[0] + 1), abs(bp[1] + 1))
    ok = max(worst.values()) <= 1e-12 and bp_err <= 1e-8
    return _record("lambert_round_trip", ok,
                   {"round_trip": worst, "branch_point_error": bp_err, "n_per_branch": 1000},
                   {"round_trip": 1e-12, "branch_point": 1e-8})


def criterion_2(rng: np.random.Generator) -> dict:
    """omega(eps) for the Log-Lipschitz gain with C = C_tilde = 1 at eps = 10^-k."""
    f = special.GainFunction("loglip", C=1.0, C_tilde=1.0, eps1=0.1)
    ks = np.arange(2, 11)
    om = special.omega_ratio(f, 10.0 ** -ks)
    ok = bool(np.all(om > 0) and np.all(np.diff(om) < 0) and om[-1] < 0.25)
    return _record("loglip_omega_limit", ok, {"k": ks.tolist(), "omega": om.tolist()},
                   {"omega_at_k10": 0.25})


def criterion_3(rng: np.random.Generator) -> dict:
    """Translation estimate on the Log-Lipschitz cusp, distances checked by the dense oracle."""
    dom = get_domain("loglip")
    j = int(np.argmin([np.linalg.norm(p.center) for p in dom.atlas]))
    patch = dom.atlas[j]
    z = []
    while len(z) < 20:
        c = patch.center + rng.uniform(-1, 1, (200, dom.real_dim)) * patch.radius / 2
        keep = (np.linalg.norm(c - patch.center, axis=1) < patch.radius / 2) & dom.contains(c)
        z.extend(c[keep])
    z = np.array(z[:20])
    eps = np.logspace(-6, math.log10(0.9 * dom.eps1), 20)
    rep = check_translation_estimate(dom, j, z, eps)
    pts = np.vstack([z, (z[:, None, :] + eps[None, :, None] * patch.direction).reshape(-1, z.shape[1])])
    oracle = dense_boundary_distance(dom, pts)
    ours = dom.raw_distance(pts)
    rel = float(np.max(np.abs(ours - oracle) / oracle))
    ok = rep["holds"] and rel <= 1e-4
    return _record("translation_estimate", ok,
                   {"patch": j, "pairs": rep["n_pairs"], "violations": len(rep["violations"]),
                    "oracle_rel_error": rel},
                   {"oracle_rel_error": 1e-4}, {"c_fit": rep["fitted_constant"]})


def criterion_4(rng: np.random.Generator) -> dict:
    """Segment property on the graph domains; the Hartogs probe fails in every direction."""
    res = {}
    for name in SEGMENT_DOMAINS:
        res[name] = bool(check_segment_property(get_domain(name), rng=rng)["passes"])
    h = check_segment_property(get_domain("hartogs"), rng=rng, directions=64)
    ok = all(res.values()) and h["failed_directions"] == 64
    return _record("segment_property", ok,
                   {"domains": res, "hartogs_failed_directions": h["failed_directions"]},
                   {"hartogs_failed_directions": 64})


def _mergelyan_domain(name: str, rng: np.random.Generator) -> dict:
    dom = get_domain(name)
    cover = build_cover(dom, rng)
    cutoffs = build_cutoffs(cover)
    set_a = closure_samples(dom, 10 ** 4, rng)
    set_b = closure_samples(dom, 10 ** 4, rng)
    fields, fits_a, fits_b = {}, [], []
    ok = True
    for fname in MERGELYAN_FIELDS:
        art = build_approximant(dom, catalog_field(fname, dom), NU, cover=cover, cutoffs=cutoffs,
                                rng=rng)
        ea = check_uniform_error(art, set_a)
        eb = check_uniform_error(art, set_b)
        margin = certify_neighborhood(art, rng=rng)
        psh = approximant_psh_check(art, rng=rng)
        f_nu = float(dom.regularity.gain_fn(NU))
        rec = {"sup_error": max(ea["sup_error"], eb["sup_error"]), "omega_nu": art.omega_nu,
               "C_fit": (ea["C_fit"], eb["C_fit"]), "margin": margin, "f_nu": f_nu,
               "psh_worst_defect": psh["worst_defect"], "psh_tol": psh["tol"],
               "psh_circles": psh["circles"], "psh_verdict": psh["verdict"]}
        good = psh["verdict"] and margin is not None and margin >= f_nu and ea["finite"] and eb["finite"]
        if fname == "const":
            good = good and rec["sup_error"] <= 1e-12
        else:
            fits_a.append(ea["C_fit"])
            fits_b.append(eb["C_fit"])
        rec["verdict"] = bool(good)
        fields[fname] = rec
        ok = ok and good
    ca, cb = max(fits_a), max(fits_b)
    C_fit = max(ca, cb)
    stable = abs(ca - cb) <= 0.2 * C_fit
    diam = dom.diameter
    within = all(r["sup_error"] <= r["omega_nu"] * (1 + C_fit * diam) * (1 + 1e-12)
                 for r in fields.values())
    return {"fields": fields, "C_fit": C_fit, "C_fit_sets": (ca, cb), "stable": bool(stable),
            "within_bound": bool(within), "diam": diam, "cover_d_ok": cover.stats["d_ok"],
            "verdict": bool(ok and stable and within)}


def criterion_5(rng: np.random.Generator) -> dict:
    """Max-of-translates approximants on the ball, the cone and the Log-Lipschitz cusp."""
    per = {name: _mergelyan_domain(name, rng) for name in MERGELYAN_DOMAINS}
    ok = all(r["verdict"] for r in per.values())
    return _record("mergelyan", ok, per,
                   {"psh_defect": "-1e-9 (1 + max|v|)", "const_sup_error": 1e-12,
                    "C_fit_stability": 0.2},
                   {name: r["C_fit"] for name, r in per.items()})


_EXHAUSTION: Dict[str, object] = {}
_EXHAUSTION_LOCK = threading.Lock()


def _loglip_exhaustion():
    # shared by criteria 6-8, built with a fixed generator so it does not depend on the seed
    with _EXHAUSTION_LOCK:
        if "art" not in _EXHAUSTION:
            _EXHAUSTION["art"] = build_exhaustion(get_domain("loglip"), ExhaustionConfig(),
                                                  rng=np.random.default_rng(0))
        return _EXHAUSTION["art"]


def criterion_6(rng: np.random.Generator) -> dict:
    """Bounded exhaustion on the Log-Lipschitz cusp: sign, both bounds, limit along a ray."""
    art = _loglip_exhaustion()
    pts = sample_interior(art.domain, 10 ** 4, rng)
    b = check_bounds(art, pts)
    ray = check_ray(art, range(3, 21), C1=b["C1"])
    ok = (b["negative"] and b["C1"] > 0 and b["lower_ok"] and b["upper_ok"] is True
          and ray["holds"])
    return _record("exhaustion", ok,
                   {"negative": b["negative"], "max_w": b["max_w"], "lower_ok": b["lower_ok"],
                    "upper_ok": b["upper_ok"], "upper_slack_min": b["upper_slack_min"],
                    "ray_delta": ray["delta"], "ray_w": ray["w"], "ray_lower": ray["lower"],
                    "ray_increasing": ray["increasing"], "ray_squeeze": ray["squeeze"],
                    "gamma": art.gamma, "lambda_constant": art.lambda_constant},
                   {"eps0": art.eps0}, {"C1": b["C1"], "C1_sets": b["C1_halves"]})


def criterion_7(rng: np.random.Generator) -> dict:
    """The sup over eps is attained at eps* >= c_hat delta(z)."""
    art = _loglip_exhaustion()
    a = near_boundary_samples(art, 100, rng)
    b = near_boundary_samples(art, 100, rng)
    rep = check_attainment(art, a, b)
    return _record("sup_attainment", rep["holds"],
                   {"floor_hits": rep["floor_hits"], "n": rep["n"],
                    "eps_star_range": rep["eps_star_range"], "stable": rep["stable"]},
                   {"stability": 0.2},
                   {"c_hat": rep["c_hat"], "c_hat_sets": rep["c_hat_halves"]})


def _cubic_field() -> ScalarField:
    def ev(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        return np.sum(p * p, axis=1) + x ** 3 - 3 * x * y * y

    return ScalarField(ev, lambda p: np.ones(len(np.atleast_2d(p)), dtype=bool),
                       "|z|^2 + Re z1^3", 2)


def criterion_8(rng: np.random.Generator) -> dict:
    """Levi floor of the attained member, and the O(h^2) order of the difference scheme."""
    art = _loglip_exhaustion()
    samples = near_boundary_samples(art, 100, rng, delta_range=(1e-3, None))
    lv = check_levi_floor(art, samples, h=1e-4)
    p = rng.uniform(-0.5, 0.5, 4)
    conv = levi_convergence(_cubic_field(), p, np.eye(2, dtype=complex))
    ok = lv["passes"] and conv["second_order"]
    return _record("levi_floor", ok,
                   {"used": lv["used"], "skipped": lv["skipped"], "fraction": lv["fraction"],
                    "min_eigenvalue": lv["min_eigenvalue"], "order_errors": conv["errors"],
                    "order_ratios": conv["ratios"], "second_order": conv["second_order"]},
                   {"fraction": 0.8, "ratio_window": [4 / 1.5, 6.0]},
                   {"C_fit": lv["fitted_C"]})


CRITERIA: Dict[int, Callable[[np.random.Generator], dict]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8,
}


def threads() -> int:
    try:
        return max(1, int(os.environ.get("PSHLAB_THREADS", "1")))
    except ValueError:
        return 1


def clear_caches() -> None:
    """Forget memoized domains and the shared exhaustion."""
    clear_cache()
    with _EXHAUSTION_LOCK:
        _EXHAUSTION.clear()


def _run_criteria(seed: int, which: List[int]):
    def one(k):
        t = time.perf_counter()
        rec = CRITERIA[k](np.random.default_rng([seed, k]))
        return k, jsonable(dict(rec, criterion=k)), 1e3 * (time.perf_counter() - t)

    if threads() > 1:
        with ThreadPoolExecutor(max_workers=threads()) as ex:
            out = list(ex.map(one, which))
    else:
        out = [one(k) for k in which]
    out.sort(key=lambda r: r[0])
    return [r[1] for r in out], {f"criterion_{k}": ms for k, _, ms in out}


def run_acceptance(seed: int = 0, which: Optional[List[int]] = None):
    """Run the selected criteria; returns (report, timings_ms).

    Every criterion draws from its own generator seeded by (seed, number), so
    results do not depend on execution order or on PSHLAB_THREADS. Criterion
    9 reruns the others from cold caches and compares the serialized reports.
    """
    which = list(range(1, 10)) if which is None else sorted(set(which))
    base = [k for k in which if k in CRITERIA]
    checks, timings = _run_criteria(seed, base)
    if 9 in which:
        t = time.perf_counter()
        first = dumps(checks)
        clear_caches()
        again, _ = _run_criteria(seed, base)
        second = dumps(again)
        same = first == second
        checks.append(jsonable(dict(_record(
            "determinism", same,
            {"sha256_first": hashlib.sha256(first.encode()).hexdigest(),
             "sha256_second": hashlib.sha256(second.encode()).hexdigest(),
             "criteria": base, "bytes": len(first)},
            {"identical": True}), criterion=9)))
        timings["criterion_9"] = 1e3 * (time.perf_counter() - t)
    report = {"suite": "acceptance", "seed": seed, "checks": checks,
              "verdict": all(c["verdict"] for c in checks)}
    return report, timings


def summary_lines(report: dict) -> List[str]:
    return [f"criterion {c['criterion']} ({c['name']}): {'PASS' if c['verdict'] else 'FAIL'}"
            for c in report["checks"]]
