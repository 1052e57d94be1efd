"""Gaussian interval likelihoods for quantizer cells, with stable tail ratios.

Everything here reduces to the probability mass a Gaussian with mean ``mu``
and a given variance puts on a quantizer cell [low, up), plus its first and
second derivatives with respect to ``mu``.  The score (d1/prob) and curvature
(d2/prob) ratios are the quantities detectors and the large-system recursion
actually consume; naive division underflows once a cell sits more than ~38
standard deviations from the mean, so those ratios switch to Mills-ratio
(erfcx) evaluations in the tails.

An :class:`InfiniteResolution` marker replaces the cell mass by the Gaussian
density itself, giving the ideal unquantized reference channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr

from .quantizer import INFINITE_RESOLUTION, InfiniteResolution, QuantizerSpec, cell_bounds

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
# |standardized bound| beyond which direct CDF differences lose the ratios
_TAIL = 8.0


def _npdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _inv_mills(x):
    """phi(x) / Phi(-x), the Gaussian hazard; stable for arbitrarily large x."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xp = np.where(pos, x, 0.0)
    xn = np.where(pos, 0.0, x)
    upper = _SQRT_2_OVER_PI / erfcx(xp / _SQRT2)
    lower = _npdf(xn) / ndtr(-xn)
    return np.where(pos, upper, lower)


def _mills(x):
    """Phi(-x) / phi(x) for x >= 0 (erfcx form); returns 0 at x = +inf."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(math.pi / 2.0) * erfcx(x / _SQRT2)
    return np.where(np.isinf(x), 0.0, out)


def _standardize(low, up, mean, var):
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise ValueError("variance must be positive")
    s = np.sqrt(var)
    a = (np.asarray(low, dtype=float) - mean) / s
    b = (np.asarray(up, dtype=float) - mean) / s
    return a, b, s


def interval_prob(low, up, mean, var):
    """Gaussian mass on [low, up); evaluated in whichever tail cancels less."""
    a, b, s = _standardize(low, up, mean, var)
    upper_tail = a + b > 0
    res = np.where(upper_tail, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))
    return np.maximum(res, 0.0)


def interval_prob_d1(low, up, mean, var):
    """d/d(mean) of interval_prob."""
    a, b, s = _standardize(low, up, mean, var)
    return (_npdf(a) - _npdf(b)) / s


def interval_prob_d2(low, up, mean, var):
    """d^2/d(mean)^2 of interval_prob; x*phi(x) terms vanish at infinite bounds."""
    a, b, s = _standardize(low, up, mean, var)
    af = np.where(np.isinf(a), 0.0, a)
    bf = np.where(np.isinf(b), 0.0, b)
    return (af * _npdf(a) - bf * _npdf(b)) / (s * s)


def _tail_ratios(a, b):
    """score*s and curvature*s^2 for cells with both standardized bounds >= TAIL."""
    finite_b = np.isfinite(b)
    bf = np.where(finite_b, b, 0.0)
    # d = phi(b)/phi(a) <= 1 here; exactly 0 for b = +inf
    d = np.where(finite_b, np.exp(0.5 * (a - bf) * (a + bf)), 0.0)
    denom = _mills(a) - _mills(b) * d
    score = (1.0 - d) / denom
    curv = (a - bf * d) / denom
    return score, curv


def _interval_ratios(low, up, mean, var):
    """(score*s, curvature*s^2) on standardized bounds, branch-stable everywhere."""
    a, b, s = _standardize(low, up, mean, var)
    a, b = np.broadcast_arrays(a, b)
    if np.any(np.isinf(a) & np.isinf(b) & (a < 0) & (b > 0)):
        raise ValueError("cell with two infinite bounds is degenerate")

    score = np.empty(a.shape, dtype=float)
    curv = np.empty(a.shape, dtype=float)

    top = np.isinf(b) & (b > 0)
    bot = np.isinf(a) & (a < 0)
    if np.any(top):
        im = _inv_mills(a[top])
        score[top] = im
        curv[top] = a[top] * im
    if np.any(bot):
        im = _inv_mills(-b[bot])
        score[bot] = -im
        curv[bot] = -b[bot] * im

    fin = ~top & ~bot
    hi = fin & (a >= _TAIL)
    lo = fin & (b <= -_TAIL)
    mid = fin & ~hi & ~lo
    if np.any(hi):
        sc, cv = _tail_ratios(a[hi], b[hi])
        score[hi] = sc
        curv[hi] = cv
    if np.any(lo):
        sc, cv = _tail_ratios(-b[lo], -a[lo])
        score[lo] = -sc
        curv[lo] = cv
    if np.any(mid):
        am, bm = a[mid], b[mid]
        mass = np.where(am + bm > 0, ndtr(-am) - ndtr(-bm), ndtr(bm) - ndtr(am))
        pa, pb = _npdf(am), _npdf(bm)
        with np.errstate(divide="ignore", invalid="ignore"):
            sc = (pa - pb) / mass
            cv = (am * pa - bm * pb) / mass
        # pathologically narrow cells: local Gaussian limit at the midpoint
        deg = ~(mass > 0)
        if np.any(deg):
            m = 0.5 * (am + bm)
            sc = np.where(deg, m, sc)
            cv = np.where(deg, m * m - 1.0, cv)
        score[mid] = sc
        curv[mid] = cv

    return score, curv, s


def interval_score(low, up, mean, var):
    """d1/prob, finite for any finite mean even when prob underflows."""
    score, _, s = _interval_ratios(low, up, mean, var)
    return score / s


def interval_curvature(low, up, mean, var):
    """d2/prob, stable companion of interval_score."""
    _, curv, s = _interval_ratios(low, up, mean, var)
    return curv / (s * s)


@dataclass(frozen=True)
class CellLikelihoodCtx:
    """Quantizer (or infinite-resolution marker) plus the effective variance."""

    spec: QuantizerSpec | InfiniteResolution
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def infinite(self) -> bool:
        return isinstance(self.spec, InfiniteResolution)


def _bounds_of(r, spec: QuantizerSpec):
    return cell_bounds(float(r), spec)


def cell_prob(r, mu, ctx: CellLikelihoodCtx):
    """Probability of observing output r given interference-free mean mu."""
    if ctx.infinite:
        s2 = ctx.variance
        d = np.asarray(r, dtype=float) - mu
        return np.exp(-0.5 * d * d / s2) / math.sqrt(2.0 * math.pi * s2)
    low, up = _bounds_of(r, ctx.spec)
    return interval_prob(low, up, mu, ctx.variance)


def cell_prob_d1(r, mu, ctx: CellLikelihoodCtx):
    """First derivative of cell_prob with respect to mu."""
    if ctx.infinite:
        d = np.asarray(r, dtype=float) - mu
        return cell_prob(r, mu, ctx) * d / ctx.variance
    low, up = _bounds_of(r, ctx.spec)
    return interval_prob_d1(low, up, mu, ctx.variance)


def cell_prob_d2(r, mu, ctx: CellLikelihoodCtx):
    """Second derivative of cell_prob with respect to mu."""
    if ctx.infinite:
        d = np.asarray(r, dtype=float) - mu
        s2 = ctx.variance
        return cell_prob(r, mu, ctx) * (d * d - s2) / (s2 * s2)
    low, up = _bounds_of(r, ctx.spec)
    return interval_prob_d2(low, up, mu, ctx.variance)


def score(r, mu, ctx: CellLikelihoodCtx):
    """cell_prob_d1 / cell_prob, evaluated without forming the quotient."""
    if ctx.infinite:
        return (np.asarray(r, dtype=float) - mu) / ctx.variance
    low, up = _bounds_of(r, ctx.spec)
    return interval_score(low, up, mu, ctx.variance)


def curvature(r, mu, ctx: CellLikelihoodCtx):
    """cell_prob_d2 / cell_prob, stable in the tails."""
    if ctx.infinite:
        d = np.asarray(r, dtype=float) - mu
        s2 = ctx.variance
        return (d * d - s2) / (s2 * s2)
    low, up = _bounds_of(r, ctx.spec)
    return interval_curvature(low, up, mu, ctx.variance)


def output_prob(r, mean, sigma0, spec: QuantizerSpec | InfiniteResolution):
    """Channel likelihood of quantized output r for noise-free mean value.

    This is the plain observation model: Gaussian noise of std sigma0 pushed
    through the quantizer.
    """
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    return cell_prob(r, mean, CellLikelihoodCtx(spec, sigma0 * sigma0))


def fisher_info(mu, ctx: CellLikelihoodCtx):
    """Sum over the output alphabet of score^2 * cell_prob at the given mean(s).

    For the infinite-resolution channel this is exactly 1/variance.
    """
    if ctx.infinite:
        return np.broadcast_to(1.0 / ctx.variance, np.shape(mu)).copy() \
            if np.shape(mu) else 1.0 / ctx.variance
    mu = np.asarray(mu, dtype=float)
    total = np.zeros(mu.shape, dtype=float)
    for r in ctx.spec.levels:
        low, up = cell_bounds(float(r), ctx.spec)
        sc = interval_score(low, up, mu, ctx.variance)
        total += sc * sc * interval_prob(low, up, mu, ctx.variance)
    return total
