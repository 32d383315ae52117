"""Quantized readback channel, mutual information and DP quantizer design.

Multiple reads are combined by averaging, so an N-read cell behaves like a
single read whose noise standard deviation is ``sigma_eta / sqrt(N)``.
All entropies are in bits.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .channel import ChannelParams, sneak_mixture

TIE_TOL = 1e-12


@dataclass(frozen=True)
class Quantizer:
    boundaries: tuple[float, ...]
    q: int | None = None

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if len(b) < 1:
            raise ValueError("a quantizer needs at least one boundary")
        if any(not lo < hi for lo, hi in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly increasing")
        if self.q is not None and 2**self.q != len(b) + 1:
            raise ValueError(f"{len(b) + 1} levels do not match q={self.q} bits")

    @property
    def levels(self) -> int:
        return len(self.boundaries) + 1

    def index(self, r):
        """Output symbol for (averaged) resistance ``r``; boundary values go up."""
        return np.searchsorted(self.boundaries, r, side="right")

    def to_json(self) -> str:
        return json.dumps({"q": self.q, "boundaries_ohm": list(self.boundaries)})

    @classmethod
    def from_json(cls, text: str) -> "Quantizer":
        data = json.loads(text)
        return cls(tuple(data["boundaries_ohm"]), data.get("q"))


@dataclass(frozen=True)
class QuantizedChannel:
    trans: np.ndarray  # shape (2, s), row b = Pr(symbol | A=b)

    def __post_init__(self):
        t = np.asarray(self.trans, dtype=float)
        if t.ndim != 2 or t.shape[0] != 2:
            raise ValueError("transition matrix must have shape (2, s)")
        object.__setattr__(self, "trans", t)


@dataclass(frozen=True)
class FineGrid:
    thresholds: np.ndarray  # u_0 < ... < u_h

    @property
    def h(self) -> int:
        return len(self.thresholds) - 1

    @property
    def interior(self) -> np.ndarray:
        return self.thresholds[1:-1]


def _interval_probs(edges, mu, sigma) -> np.ndarray:
    """Gaussian mass of consecutive intervals, per component.

    ``edges`` includes -inf and +inf.  Upper-tail intervals use survival
    differences to avoid cancellation.
    """
    z = (np.asarray(edges)[:, None] - mu[None, :]) / sigma
    lo, hi = z[:-1], z[1:]
    upper = lo > 0
    with np.errstate(invalid="ignore"):
        cdf_diff = ndtr(hi) - ndtr(lo)
        sf_diff = ndtr(-lo) - ndtr(-hi)
    return np.where(upper, sf_diff, cdf_diff)


def _component_probs(boundaries, bit: int, params: ChannelParams, n_reads: int) -> np.ndarray:
    mix = sneak_mixture(params)
    edges = np.concatenate(([-np.inf], np.asarray(boundaries, dtype=float), [np.inf]))
    sigma = params.sigma_eta / math.sqrt(n_reads)
    return _interval_probs(edges, mix.rho(bit, params), sigma)


def quantized_transition(quantizer, bit: int, params: ChannelParams, n_reads: int = 1) -> np.ndarray:
    """Pr(symbol j | A=bit) for the read-averaged channel."""
    if n_reads < 1:
        raise ValueError("n_reads must be >= 1")
    bounds = quantizer.boundaries if isinstance(quantizer, Quantizer) else quantizer
    return _component_probs(bounds, bit, params, n_reads) @ sneak_mixture(params).weights


def quantized_channel(quantizer, params: ChannelParams, n_reads: int = 1) -> QuantizedChannel:
    return QuantizedChannel(np.stack([quantized_transition(quantizer, b, params, n_reads) for b in (0, 1)]))


def _xlogx_ratio(p, total):
    """p * log2(total / p) with the 0 log 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * np.log2(total / p)
    return np.where(p > 0, out, 0.0)


def mutual_information(chan: QuantizedChannel | np.ndarray) -> float:
    """I(A; symbol) in bits under uniform inputs."""
    t = chan.trans if isinstance(chan, QuantizedChannel) else np.asarray(chan, dtype=float)
    py = 0.5 * (t[0] + t[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        h_y = -np.sum(np.where(py > 0, py * np.log2(py), 0.0))
        h_y_a = -0.5 * np.sum(np.where(t > 0, t * np.log2(t), 0.0))
    return float(h_y - h_y_a)


def cell_cost(p0, p1):
    """Contribution of one output cell to H(A | symbol), in bits."""
    total = np.asarray(p0) + np.asarray(p1)
    return 0.5 * (_xlogx_ratio(p0, total) + _xlogx_ratio(p1, total))


def partial_cond_entropy(interval, params: ChannelParams, n_reads: int = 1) -> float:
    """H(A | symbol) share of the resistance interval ``[lo, hi)``."""
    mix = sneak_mixture(params)
    sigma = params.sigma_eta / math.sqrt(n_reads)
    p0, p1 = (float(_interval_probs(np.asarray(interval, dtype=float), mix.rho(b, params), sigma)[0]
                    @ mix.weights) for b in (0, 1))
    return float(cell_cost(p0, p1))


def grid_span(params: ChannelParams) -> tuple[float, float]:
    mix = sneak_mixture(params)
    lo = float(np.min(mix.rho(1, params))) - 6 * params.sigma_eta
    hi = params.r0 + 6 * params.sigma_eta
    return lo, hi


def fine_grid(params: ChannelParams, h: int = 1000) -> FineGrid:
    """Uniform h-interval grid; the outer cells absorb the tails."""
    if h < 2:
        raise ValueError("h must be >= 2")
    lo, hi = grid_span(params)
    return FineGrid(np.linspace(lo, hi, h + 1))


def fine_channel(grid: FineGrid, params: ChannelParams, n_reads: int) -> np.ndarray:
    """(2, h) transition matrix of the fine grid quantizer."""
    return np.stack([quantized_transition(grid.interior, b, params, n_reads) for b in (0, 1)])


def _merged_cost_matrix(fine: np.ndarray) -> np.ndarray:
    """cost[g, o] of pooling fine cells g..o-1 into one output; inf if o <= g."""
    cum = np.concatenate((np.zeros((2, 1)), np.cumsum(fine, axis=1)), axis=1)
    p0 = cum[0][None, :] - cum[0][:, None]
    p1 = cum[1][None, :] - cum[1][:, None]
    p0 = np.clip(p0, 0.0, None)
    p1 = np.clip(p1, 0.0, None)
    cost = cell_cost(p0, p1)
    h1 = cum.shape[1]
    valid = np.arange(h1)[None, :] > np.arange(h1)[:, None]
    return np.where(valid, cost, np.inf)


def _dp_partition(fine: np.ndarray, s: int) -> list[int]:
    """Optimal cut indices 0 < g_1 < ... < g_{s-1} < h minimising H(A|symbol)."""
    h = fine.shape[1]
    cost = _merged_cost_matrix(fine)
    # best[z][o]: minimal cost of splitting cells 0..o-1 into z outputs
    best = np.full((s + 1, h + 1), np.inf)
    arg = np.zeros((s + 1, h + 1), dtype=int)
    best[1] = cost[0]
    for z in range(2, s + 1):
        tot = best[z - 1][:, None] + cost
        m = tot.min(axis=0)
        best[z] = m
        # smallest index among ties
        arg[z] = np.argmax(tot <= m[None, :] + TIE_TOL, axis=0)
    cuts = []
    o = h
    for z in range(s, 1, -1):
        o = arg[z][o]
        cuts.append(int(o))
    return sorted(cuts)


def design_dp(params: ChannelParams, n_reads: int = 1, q: int = 1, h: int = 1000):
    """MI-optimal q-bit quantizer with boundaries on the fine grid.

    Returns ``(Quantizer, mi_bits)``.
    """
    s = 2**q
    if s > h:
        raise ValueError(f"cannot pick {s} levels from h={h} grid cells")
    grid = fine_grid(params, h)
    fine = fine_channel(grid, params, n_reads)
    cuts = _dp_partition(fine, s)
    quant = Quantizer(tuple(grid.thresholds[c] for c in cuts), q)
    return quant, mutual_information(quantized_channel(quant, params, n_reads))


def design_exhaustive(params: ChannelParams, n_reads: int = 1, q: int = 1, h: int = 16):
    """Brute-force search over every choice of s-1 grid thresholds."""
    s = 2**q
    if s > h:
        raise ValueError(f"cannot pick {s} levels from h={h} grid cells")
    if math.comb(h - 1, s - 1) > 10**6:
        raise ValueError("too many boundary subsets for exhaustive search")
    grid = fine_grid(params, h)
    fine = fine_channel(grid, params, n_reads)
    cum = np.concatenate((np.zeros((2, 1)), np.cumsum(fine, axis=1)), axis=1)
    best, best_cuts = -np.inf, None
    for cuts in itertools.combinations(range(1, h), s - 1):
        edges = (0, *cuts, h)
        trans = cum[:, edges[1:]] - cum[:, edges[:-1]]
        mi = mutual_information(trans)
        if mi > best + TIE_TOL:
            best, best_cuts = mi, cuts
    quant = Quantizer(tuple(grid.thresholds[c] for c in best_cuts), q)
    return quant, mutual_information(quantized_channel(quant, params, n_reads))


def mi_multiread_exact_mc(params: ChannelParams, n_reads: int, quantizer=None,
                          trials: int = 100_000, rng: np.random.Generator | None = None):
    """Monte Carlo I(A; reads) using the joint N-read density, no averaging.

    With ``quantizer`` every read is quantized separately and the estimate
    is for the N-fold symbol tuple.  Returns ``(mi_bits, ci95_half_width)``.
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    rng = np.random.default_rng() if rng is None else rng
    mix = sneak_mixture(params)
    bits = rng.integers(0, 2, size=trials)
    comp = rng.choice(len(mix.weights), size=trials, p=mix.weights / mix.weights.sum())
    mus = np.stack([mix.rho(0, params), mix.rho(1, params)])
    reads = mus[bits, comp][:, None] + params.sigma_eta * rng.standard_normal((trials, n_reads))
    logw = mix.log_weights()
    if quantizer is None:
        from .map_detector import log_likelihood

        ll = np.stack([log_likelihood(reads, b, params) for b in (0, 1)], axis=1)
    else:
        sym = np.asarray(quantizer.index(reads))
        ll = []
        for b in (0, 1):
            with np.errstate(divide="ignore"):
                logp = np.log(_component_probs(quantizer.boundaries, b, params, 1))  # (s, K)
            per_comp = logp[sym].sum(axis=1)  # (trials, K)
            ll.append(logsumexp(per_comp + logw[None, :], axis=1))
        ll = np.stack(ll, axis=1)
    own = ll[np.arange(trials), bits]
    mixed = np.logaddexp(ll[:, 0], ll[:, 1]) - math.log(2)
    info = (own - mixed) / math.log(2)
    return float(info.mean()), float(1.96 * info.std(ddof=1) / math.sqrt(trials))
