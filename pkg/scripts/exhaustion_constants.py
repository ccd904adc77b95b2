#!/usr/bin/env python3
"""Which candidate of v_eps wins, as the bump constant K and gamma vary.

For points x_j + t w_j in a patch plateau at several depths delta, prints the
winning branch at eps = delta and the margin log(1/delta) - (gamma - 1) K L(eps)
that the patched candidate needs to be positive.
"""
import argparse

import numpy as np

from pshlab.catalog import get_domain
from pshlab.exhaustion import ExhaustionConfig, bump_levi_bound, build_exhaustion


def plateau_point(art, j, depth):
    x, w = art.centers[j], art.directions[j]
    lo, hi = 0.0, art.radii[j] / 4
    for _ in range(200):
        t = 0.5 * (lo + hi)
        p = x + t * w
        if art.domain.contains(p[None])[0] and art.domain.raw_distance(p[None])[0] >= depth:
            hi = t
        else:
            lo = t
    return x + hi * w


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--domain", default="loglip")
    ap.add_argument("--K", type=float, nargs="*", default=None,
                    help="bump constants to try (default: the derived bound, 10, 1.1)")
    args = ap.parse_args()
    dom = get_domain(args.domain)
    Ks = args.K or [bump_levi_bound(max(p.radius for p in dom.atlas)), 10.0, 1.1]
    depths = [1e-3, 1e-6, 1e-9, 1e-12]
    print("K gamma delta L log(1/delta) margin branch")
    for K in Ks:
        art = build_exhaustion(dom, ExhaustionConfig(lambda_constant=K), rng=np.random.default_rng(0))
        j = len(art.centers) // 2
        for d in depths:
            z = plateau_point(art, j, d)[None]
            dl = float(art.domain.raw_distance(z)[0])
            L = float(art.gain.log_ratio(dl))
            margin = np.log(1 / dl) - (art.gamma - 1) * K * L
            _, br = art.v_family(z, np.array([[dl]]))
            print(f"{K:.6g} {art.gamma:g} {dl:.3e} {L:.4f} {np.log(1 / dl):.3f} "
                  f"{margin:.4g} {int(br[0, 0])}")


if __name__ == "__main__":
    main()
