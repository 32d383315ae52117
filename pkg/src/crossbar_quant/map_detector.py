"""MAP detection on the full N-read vector and its bit-error probability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtr

from .channel import ChannelParams, sneak_mixture
from .stats import wilson_interval


@dataclass(frozen=True)
class BepEstimate:
    value: float
    ci95: float
    trials: int
    method: str
    errors: int | None = None


def log_likelihood(reads, bit: int, params: ChannelParams) -> np.ndarray:
    """log Pr(reads | A=bit) under the sneak-path Gaussian mixture.

    ``reads`` has shape ``(..., N)``; the result drops the last axis.
    """
    reads = np.asarray(reads, dtype=float)
    n = reads.shape[-1]
    mix = sneak_mixture(params)
    mu = mix.rho(bit, params)
    var = params.sigma_eta**2
    # sum_k (r_k - mu)^2 = S2 - 2 mu S1 + N mu^2
    s1 = reads.sum(axis=-1)[..., None]
    s2 = (reads * reads).sum(axis=-1)[..., None]
    sq = s2 - 2.0 * mu * s1 + n * mu * mu
    sq = np.maximum(sq, 0.0)
    logs = mix.log_weights() - sq / (2.0 * var)
    return logsumexp(logs, axis=-1) - 0.5 * n * math.log(2 * math.pi * var)


def likelihood(reads, bit: int, params: ChannelParams):
    out = np.exp(log_likelihood(reads, bit, params))
    return float(out) if np.ndim(out) == 0 else out


def map_detect(reads, params: ChannelParams):
    """argmax_b Pr(reads | b); ties go to 0."""
    ll0 = log_likelihood(reads, 0, params)
    ll1 = log_likelihood(reads, 1, params)
    out = np.where(ll1 > ll0, 1, 0)
    return int(out) if out.ndim == 0 else out


def _draw(params, n_reads, trials, rng, comps=None):
    """Bits, component indices and reads drawn from the mixture model."""
    mix = sneak_mixture(params)
    w = mix.weights if comps is None else mix.weights[comps]
    w = w / w.sum()
    idx = rng.choice(len(w), size=trials, p=w)
    if comps is not None:
        idx = np.asarray(comps)[idx]
    bits = rng.integers(0, 2, size=trials)
    mus = np.stack([mix.rho(0, params), mix.rho(1, params)])
    reads = mus[bits, idx][:, None] + params.sigma_eta * rng.standard_normal((trials, n_reads))
    return bits, reads


def bep_map_mc(params: ChannelParams, n_reads: int, trials: int, rng: np.random.Generator,
               batch: int = 200_000, stratified: bool = False) -> BepEstimate:
    """Monte Carlo MAP bit-error probability.

    A sneak state is drawn from the mixture, then N reads from its Gaussian.
    With ``stratified`` half the trials go to the path-free component and
    half to the sneak-path components, recombined with their weights.
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    if not stratified:
        errors = _count_map_errors(params, n_reads, trials, rng, batch)
        lo, hi = wilson_interval(errors, trials)
        return BepEstimate(errors / trials, 0.5 * (hi - lo), trials, "mc", errors)

    mix = sneak_mixture(params)
    free = np.nonzero(np.isinf(mix.alphas))[0]
    paths = np.nonzero(~np.isinf(mix.alphas))[0]
    w_free = float(mix.weights[free].sum() / mix.weights.sum())
    if len(paths) == 0:
        return bep_map_mc(params, n_reads, trials, rng, batch)
    half = trials // 2
    value, var = 0.0, 0.0
    for comps, w, t in ((free, w_free, trials - half), (paths, 1.0 - w_free, half)):
        e = _count_map_errors(params, n_reads, t, rng, batch, comps)
        p = e / t
        value += w * p
        var += w * w * p * (1 - p) / t
    return BepEstimate(value, 1.96 * math.sqrt(var), trials, "mc-stratified")


def _count_map_errors(params, n_reads, trials, rng, batch, comps=None) -> int:
    errors = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        bits, reads = _draw(params, n_reads, b, rng, comps)
        errors += int(np.count_nonzero(map_detect(reads, params) != bits))
        done += b
    return errors


def decision_roots(params: ChannelParams, points: int = 40_001, max_roots: int = 8) -> list[float]:
    """Single-read resistances where the MAP decision flips."""
    mix = sneak_mixture(params)
    mus = np.concatenate([mix.rho(0, params), mix.rho(1, params)])
    sig = params.sigma_eta
    grid = np.linspace(mus.min() - 10 * sig, mus.max() + 10 * sig, points)

    def g(r):
        r = np.atleast_1d(r)[:, None]
        return (log_likelihood(r, 0, params) - log_likelihood(r, 1, params))

    vals = g(grid)
    roots = []
    for k in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        a, b = grid[k], grid[k + 1]
        if vals[k] == 0:
            roots.append(float(a))
            continue
        roots.append(brentq(lambda x: float(g(x)[0]), a, b, xtol=1e-12, rtol=1e-15))
    if len(roots) > max_roots:
        raise RuntimeError(f"{len(roots)} decision boundaries found; model looks broken")
    return roots


def bep_map_quadrature_1d(params: ChannelParams) -> BepEstimate:
    """Deterministic single-read MAP error probability.

    The real line is cut at the decision roots; each piece is assigned to the
    decided bit and the Gaussian mass of every wrong-bit component inside it
    is accumulated exactly.
    """
    mix = sneak_mixture(params)
    roots = decision_roots(params)
    edges = np.concatenate(([-np.inf], roots, [np.inf]))
    # decided bit per piece from the sign of the log-likelihood ratio at its interior
    mids = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if np.isinf(lo):
            mids.append(hi - 1.0 if np.isfinite(hi) else 0.0)
        elif np.isinf(hi):
            mids.append(lo + 1.0)
        else:
            mids.append(0.5 * (lo + hi))
    mids = np.array(mids)[:, None]
    decide = np.where(log_likelihood(mids, 1, params) > log_likelihood(mids, 0, params), 1, 0)
    total = 0.0
    for bit in (0, 1):
        mu = mix.rho(bit, params)
        z = (edges[:, None] - mu[None, :]) / params.sigma_eta
        mass = ndtr(z[1:]) - ndtr(z[:-1])  # (pieces, K)
        wrong = decide != bit
        total += 0.5 * float((mass[wrong] @ mix.weights).sum())
    return BepEstimate(total, 0.0, 0, "quadrature")
