"""Real Lambert W branches, translation-gain functions and the cusp profile.

All functions accept scalars or numpy arrays and return the same shape.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# 1/e split into a head and a tail so that x + 1/e keeps its low bits near
# the branch point.
_INV_E_HI = 0.36787944117144233
_INV_E_LO = -1.2428753672788363e-17
_E = math.e

# Coefficients of W in powers of p = sqrt(2(e x + 1)) around x = -1/e.
# The lower branch uses the same series in -p.
_BRANCH_SERIES = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0,
                  769.0 / 17280.0, -221.0 / 8505.0)
BRANCH_SERIES_RADIUS = 1e-6
_MAX_HALLEY_STEPS = 50


class LambertBranch(enum.IntEnum):
    PRINCIPAL = 0
    LOWER = -1


def _as_branch(branch) -> LambertBranch:
    try:
        return LambertBranch(int(branch))
    except ValueError:
        raise DomainError(f"unknown Lambert W branch {branch!r}") from None


def _branch_series(p):
    out = np.zeros_like(p)
    for c in reversed(_BRANCH_SERIES):
        out = out * p + c
    return out


def _halley(x, w, active):
    """Refine w*exp(w) = x in place on the ``active`` mask (cubic convergence)."""
    for _ in range(_MAX_HALLEY_STEPS):
        if not active.any():
            break
        wa = w[active]
        xa = x[active]
        ew = np.exp(wa)
        f = wa * ew - xa
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        wa_new = wa - dw
        w[active] = wa_new
        done = np.abs(dw) <= 4.0 * np.finfo(float).eps * (1.0 + np.abs(wa_new))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return w


def lambert_w(branch, x):
    """Real Lambert W on the principal (0) or lower (-1) branch.

    Solves ``w * exp(w) = x``. The principal branch is defined for
    ``x >= -1/e`` with ``w >= -1``; the lower branch for ``-1/e <= x < 0``
    with ``w <= -1``. An asymptotic or branch-point series supplies the
    starting value and Halley's iteration refines it. Within
    ``BRANCH_SERIES_RADIUS`` of ``-1/e`` the series value is returned as is.
    """
    br = _as_branch(branch)
    scalar = np.ndim(x) == 0
    shape = np.shape(x)
    xa = np.asarray(x, dtype=float).ravel().copy()
    if np.isnan(xa).any():
        raise DomainError("Lambert W argument is NaN")
    shift = (xa + _INV_E_HI) + _INV_E_LO
    # tolerate rounding of arguments meant to be exactly -1/e
    shift = np.where((shift < 0) & (shift > -4e-17), 0.0, shift)
    if (shift < 0).any():
        raise DomainError(f"Lambert W argument below -1/e: {xa[shift < 0][:3]}")
    if br is LambertBranch.LOWER and (xa >= 0).any():
        raise DomainError("lower branch W_-1 is defined only on [-1/e, 0)")

    p = np.sqrt(2.0 * _E * shift)
    sign = 1.0 if br is LambertBranch.PRINCIPAL else -1.0
    w = np.empty_like(xa)
    near = shift < 0.25
    w[near] = _branch_series(sign * p[near])
    far = ~near
    if br is LambertBranch.PRINCIPAL:
        l1 = np.log1p(xa[far])
        w[far] = l1 * (1.0 - np.log1p(l1) / (2.0 + l1))
    else:
        l1 = np.log(-xa[far])
        l2 = np.log(-l1)
        w[far] = l1 - l2 + l2 / l1

    active = shift >= BRANCH_SERIES_RADIUS
    if br is LambertBranch.PRINCIPAL:
        active &= xa != 0.0
    w = _halley(xa, w, active)
    if br is LambertBranch.PRINCIPAL:
        w = np.maximum(w, -1.0)
    else:
        w = np.minimum(w, -1.0)
    return float(w[0]) if scalar else w.reshape(shape)


def cusp_graph(x):
    """|x| W0(1/|x|): the cusp profile shifted so that its tip sits at 0."""
    ax = np.abs(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 0
    ax = np.atleast_1d(ax)
    out = np.zeros_like(ax)
    ok = ax > 1e-300
    if ok.any():
        out[ok] = ax[ok] * lambert_w(0, 1.0 / ax[ok])
    return float(out[0]) if scalar else out


def cusp_profile(x):
    """The cusp 1 + |x| W0(1/|x|), with its limit value 1 at x = 0."""
    return 1.0 + cusp_graph(x)


GAIN_FORMS = ("lipschitz", "hoelder", "loglip", "loglip_simplified")


@dataclass(frozen=True)
class GainFunction:
    """Guaranteed distance gain f(eps) under an inward translation by eps.

    ``form`` selects the closed form:

    * ``lipschitz``: eps / C
    * ``hoelder``: (eps / C) ** (1 / exponent)
    * ``loglip``: -eps / (C_tilde * W_-1(-eps / C))
    * ``loglip_simplified``: eps / (C_tilde * log(1 / eps))

    Valid for ``0 < eps < eps1``.
    """

    form: str
    C: float = 1.0
    C_tilde: float = 1.0
    exponent: float = 1.0
    eps1: float = 0.1

    def __post_init__(self):
        if self.form not in GAIN_FORMS:
            raise DomainError(f"unknown gain form {self.form!r}")
        if self.C <= 0 or self.C_tilde <= 0:
            raise DomainError("gain constants must be positive")
        if self.form == "hoelder" and not 0 < self.exponent < 1:
            raise DomainError("Hoelder exponent must lie in (0, 1)")
        if not 0 < self.eps1 < 1:
            raise DomainError("eps1 must lie in (0, 1)")

    @property
    def upper(self) -> float:
        """Right end of the validity interval (excluded, except C/e for loglip)."""
        if self.form == "loglip":
            return min(self.eps1, self.C / math.e)
        return self.eps1

    def _check(self, eps):
        e = np.asarray(eps, dtype=float)
        bad = ~(e > 0) | (e >= self.eps1)
        if self.form == "loglip":
            bad |= e > self.C / math.e
        if np.any(bad):
            raise DomainError(
                f"eps outside validity interval (0, {self.upper:g}) for {self.form}")
        return e

    def __call__(self, eps):
        e = self._check(eps)
        if self.form == "lipschitz":
            out = e / self.C
        elif self.form == "hoelder":
            out = (e / self.C) ** (1.0 / self.exponent)
        elif self.form == "loglip":
            out = -e / (self.C_tilde * lambert_w(-1, -e / self.C))
        else:
            out = e / (self.C_tilde * np.log(1.0 / e))
        return float(out) if np.ndim(out) == 0 else out

    def log_ratio(self, eps):
        """log(eps / f(eps)), computed without forming the small quotient."""
        e = self._check(eps)
        if self.form == "lipschitz":
            out = np.full_like(e, math.log(self.C))
        elif self.form == "hoelder":
            a = 1.0 / self.exponent
            out = a * np.log(self.C) + (1.0 - a) * np.log(e)
        elif self.form == "loglip":
            out = np.log(self.C_tilde * -lambert_w(-1, -e / self.C))
        else:
            out = np.log(self.C_tilde * np.log(1.0 / e))
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, eps):
        """Closed-form d f / d eps."""
        e = self._check(eps)
        if self.form == "lipschitz":
            out = np.full_like(e, 1.0 / self.C)
        elif self.form == "hoelder":
            a = 1.0 / self.exponent
            out = a * e ** (a - 1.0) / self.C ** a
        elif self.form == "loglip":
            out = -1.0 / (self.C_tilde * (1.0 + lambert_w(-1, -e / self.C)))
        else:
            L = np.log(1.0 / e)
            out = (L + 1.0) / (self.C_tilde * L * L)
        return float(out) if np.ndim(out) == 0 else out

    def scaled(self, factor: float) -> "GainFunction":
        """The gain ``factor * f``, expressed in the same form when possible."""
        if self.form == "lipschitz":
            return GainFunction("lipschitz", C=self.C / factor, eps1=self.eps1)
        if self.form in ("loglip", "loglip_simplified"):
            return GainFunction(self.form, C=self.C, C_tilde=self.C_tilde / factor,
                                eps1=self.eps1)
        # (eps/C')^(1/g) = factor * (eps/C)^(1/g)  =>  C' = C / factor**g
        return GainFunction("hoelder", C=self.C / factor ** self.exponent,
                            exponent=self.exponent, eps1=self.eps1)


def gain(f: GainFunction, eps):
    return f(eps)


def omega_ratio(f: GainFunction, eps):
    """log(eps / f(eps)) / log(1 / eps)."""
    e = np.asarray(eps, dtype=float)
    if np.any(e >= 1):
        raise DomainError("omega_ratio needs eps < 1")
    out = f.log_ratio(e) / np.log(1.0 / e)
    return float(out) if np.ndim(out) == 0 else out


def gain_table(f: GainFunction, eps):
    """Rows (eps, f(eps), omega(eps)) for an array of eps values."""
    e = np.asarray(eps, dtype=float)
    return np.column_stack([e, f(e), omega_ratio(f, e)])
