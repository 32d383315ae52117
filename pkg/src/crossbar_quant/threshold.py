"""Single-bit (threshold) detection on the average of N reads.

A threshold ``t1`` turns the channel into a binary asymmetric channel with
crossovers ``p0 = Pr(decide 1 | 0)`` and ``p1 = Pr(decide 0 | 1)``.  The
MI-optimal threshold is the zero of dI/dt1 on ``[r1, r0]``, located by
bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr, logsumexp

from .channel import ChannelParams, sneak_mixture
from .quantizer import mutual_information

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BacChannel:
    p0: float
    p1: float

    def matrix(self) -> np.ndarray:
        return np.array([[1 - self.p0, self.p0], [self.p1, 1 - self.p1]])

    @property
    def bep(self) -> float:
        return 0.5 * (self.p0 + self.p1)


@dataclass(frozen=True)
class ThresholdDetector:
    t1: float
    n_reads: int = 1
    degenerate: bool = False

    def __call__(self, reads):
        return threshold_detect(reads, self.t1)


def _log_tails(t1: float, params: ChannelParams, n_reads: int):
    """log p0, log(1-p0), log p1, log(1-p1) without underflow."""
    mix = sneak_mixture(params)
    logw = mix.log_weights()
    scale = math.sqrt(n_reads) / params.sigma_eta
    z0 = (t1 - mix.rho(0, params)) * scale
    z1 = (t1 - mix.rho(1, params)) * scale
    # a 0 is misread when the mean falls below t1, a 1 when it reaches t1
    return (
        logsumexp(logw + log_ndtr(z0)),
        logsumexp(logw + log_ndtr(-z0)),
        logsumexp(logw + log_ndtr(-z1)),
        logsumexp(logw + log_ndtr(z1)),
    )


def bac_from_threshold(t1: float, params: ChannelParams, n_reads: int = 1) -> BacChannel:
    if n_reads < 1:
        raise ValueError("n_reads must be >= 1")
    lp0, _, lp1, _ = _log_tails(t1, params, n_reads)
    return BacChannel(float(math.exp(lp0)), float(math.exp(lp1)))


def bac_mi(chan: BacChannel) -> float:
    """I(A; decision) in bits, uniform inputs."""
    p0, p1 = chan.p0, chan.p1
    out0 = 0.5 * (1 - p0 + p1)
    out1 = 0.5 * (1 + p0 - p1)
    terms = (
        (1 - p0, out0),
        (p0, out1),
        (p1, out0),
        (1 - p1, out1),
    )
    return 0.5 * sum(p * math.log2(p / o) for p, o in terms if p > 0)


def threshold_bep(t1: float, params: ChannelParams, n_reads: int = 1) -> float:
    return bac_from_threshold(t1, params, n_reads).bep


def _log_slopes(t1: float, params: ChannelParams, n_reads: int):
    """log |dp0/dt1| and log |dp1/dt1|."""
    mix = sneak_mixture(params)
    logw = mix.log_weights()
    scale = math.sqrt(n_reads) / params.sigma_eta
    out = []
    for bit in (0, 1):
        z = (t1 - mix.rho(bit, params)) * scale
        out.append(logsumexp(logw - 0.5 * z * z) + math.log(scale) - 0.5 * math.log(2 * math.pi))
    return out


def _derivative_parts(t1: float, params: ChannelParams, n_reads: int):
    lp0, lq0, lp1, lq1 = _log_tails(t1, params, n_reads)
    # log Pr(decide 0), log Pr(decide 1), up to the common factor 1/2
    lo0 = np.logaddexp(lq0, lp1)
    lo1 = np.logaddexp(lp0, lq1)
    # dI/dp0 and dI/dp1 in bits (before the 1/2 factor)
    g0 = (lp0 + lo0 - lq0 - lo1) / LOG2
    g1 = (lp1 + lo1 - lq1 - lo0) / LOG2
    ls0, ls1 = _log_slopes(t1, params, n_reads)
    # dp0/dt1 > 0 and dp1/dt1 < 0
    return ls0, g0, ls1, g1


def mi_derivative(t1: float, params: ChannelParams, n_reads: int = 1) -> float:
    """dI(A; decision)/dt1 in bits per ohm."""
    ls0, g0, ls1, g1 = _derivative_parts(t1, params, n_reads)
    return float(0.5 * (math.exp(ls0) * g0 - math.exp(ls1) * g1))


def _derivative_sign(t1: float, params: ChannelParams, n_reads: int) -> int:
    """Sign of the derivative, decided in the log domain so that it never underflows."""
    ls0, g0, ls1, g1 = _derivative_parts(t1, params, n_reads)
    terms = []
    for ls, coef in ((ls0, g0), (ls1, -g1)):
        if coef != 0:
            terms.append((ls + math.log(abs(coef)), 1 if coef > 0 else -1))
    if not terms:
        return 0
    if len(terms) == 1 or terms[0][1] == terms[1][1]:
        return terms[0][1]
    (la, sa), (lb, sb) = terms
    if la == lb:
        return 0
    return sa if la > lb else sb


def optimize_threshold_bisection(params: ChannelParams, n_reads: int = 1, ns: int = 128,
                                 xtol: float = 1e-9) -> ThresholdDetector:
    """MI-optimal threshold on ``[r1, r0]``.

    Bisection first runs over the ``ns + 1`` sample points of the search
    range, then the bracketing sample interval is refined to ``xtol``.
    If the derivative does not change sign the better end point is
    returned with ``degenerate=True``.
    """
    if ns < 2:
        raise ValueError("ns must be >= 2")
    samples = np.linspace(params.r1, params.r0, ns + 1)

    def sign(k):
        return _derivative_sign(float(samples[k]), params, n_reads)

    lo, hi = 0, ns
    s_lo, s_hi = sign(lo), sign(hi)
    if s_lo == 0:
        return ThresholdDetector(float(samples[lo]), n_reads)
    if s_hi == 0:
        return ThresholdDetector(float(samples[hi]), n_reads)
    if s_lo < 0 or s_hi > 0:
        return _grid_fallback(params, n_reads)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        s = sign(mid)
        if s == 0:
            return ThresholdDetector(float(samples[mid]), n_reads)
        if s > 0:
            lo = mid
        else:
            hi = mid
    a, b = float(samples[lo]), float(samples[hi])
    # continuous refinement of the bracket
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        s = _derivative_sign(mid, params, n_reads)
        if s == 0:
            a = b = mid
            break
        if s > 0:
            a = mid
        else:
            b = mid
    return ThresholdDetector(0.5 * (a + b), n_reads)


def _grid_fallback(params: ChannelParams, n_reads: int, points: int = 1024) -> ThresholdDetector:
    grid = np.linspace(params.r1, params.r0, points)
    mis = [bac_mi(bac_from_threshold(t, params, n_reads)) for t in grid]
    return ThresholdDetector(float(grid[int(np.argmax(mis))]), n_reads, degenerate=True)


def threshold_detect(reads, t1: float):
    """Decide 0 when the mean read is at or above ``t1``, else 1."""
    reads = np.asarray(reads, dtype=float)
    mean = reads.mean(axis=-1)
    out = np.where(mean >= t1, 0, 1)
    return int(out) if out.ndim == 0 else out


def baseline_single_read_threshold(params: ChannelParams, points: int = 1024) -> float:
    """Single-read BEP-minimising threshold, reused unchanged for N reads."""
    grid = np.linspace(params.r1, params.r0, points)
    beps = np.array([threshold_bep(t, params, 1) for t in grid])
    k = int(np.argmin(beps))
    step = grid[1] - grid[0]
    lo, hi = max(params.r1, grid[k] - step), min(params.r0, grid[k] + step)
    res = minimize_scalar(lambda t: threshold_bep(t, params, 1), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-8})
    return float(res.x) if res.fun <= beps[k] else float(grid[k])


def bac_mi_via_matrix(chan: BacChannel) -> float:
    """Same quantity through the general quantized-channel formula."""
    return mutual_information(chan.matrix())


__all__ = [
    "BacChannel",
    "ThresholdDetector",
    "bac_from_threshold",
    "bac_mi",
    "bac_mi_via_matrix",
    "baseline_single_read_threshold",
    "mi_derivative",
    "optimize_threshold_bisection",
    "threshold_bep",
    "threshold_detect",
]
