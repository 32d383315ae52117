"""Readback channel of a resistive crossbar with length-3 sneak paths.

A cell ``(i, j)`` sees a sneak path through ``(i, c) -> (l, c) -> (l, j)``
whenever the three cells store 1 and the selector of the intersection cell
``(l, c)`` has failed.  The set of active intersection cells of one target
cell is a :class:`PathConfig`; its resistor network fixes the parallel
resistance ``alpha * r1`` seen by the read circuit.

The analytical model groups configurations by type ``(L, k_l, k_c)`` and
weighs each type by its exact probability under i.i.d. cell contents and
selector failures.  Within a type, configurations are further split by their
equivalent resistance, so the mixture carries one Gaussian component per
distinct ``alpha``.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import binom, norm

# Enumeration of configurations inside one (k_l x k_c) grid is brute force.
MAX_ENUMERATION = 2_000_000


@dataclass(frozen=True)
class ChannelParams:
    m: int = 16
    n: int = 16
    r0: float = 1000.0
    r1: float = 100.0
    p_f: float = 0.001
    q1: float = 0.5
    sigma_eta: float = 80.0
    l_max: int = 4

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValueError("array must have at least 2 rows and 2 columns")
        if not 0 < self.r1 < self.r0:
            raise ValueError("resistances must satisfy 0 < r1 < r0")
        if not self.sigma_eta > 0:
            raise ValueError("sigma_eta must be positive")
        if not 0 <= self.p_f <= 1 or not 0 <= self.q1 <= 1:
            raise ValueError("p_f and q1 must lie in [0, 1]")
        if self.l_max < 0:
            raise ValueError("l_max must be non-negative")

    def with_sigma(self, sigma_eta: float) -> "ChannelParams":
        return ChannelParams(**{**asdict(self), "sigma_eta": float(sigma_eta)})

    def replace(self, **changes) -> "ChannelParams":
        return ChannelParams(**{**asdict(self), **changes})

    def r(self, bit: int) -> float:
        return self.r1 if bit else self.r0

    # JSON keys carry units in their names.
    _JSON_KEYS = {
        "m": "m",
        "n": "n",
        "r0": "r0_ohm",
        "r1": "r1_ohm",
        "p_f": "p_f",
        "q1": "q1",
        "sigma_eta": "sigma_eta_ohm",
        "l_max": "l_max",
    }

    def to_json_dict(self) -> dict:
        return {key: getattr(self, attr) for attr, key in self._JSON_KEYS.items()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "ChannelParams":
        kwargs = {}
        for attr, key in cls._JSON_KEYS.items():
            if key in data:
                kwargs[attr] = data[key]
        for int_attr in ("m", "n", "l_max"):
            if int_attr in kwargs:
                kwargs[int_attr] = int(kwargs[int_attr])
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChannelParams":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class PathConfig:
    """Active intersection cells (low resistance and failed selector)."""

    cells: frozenset = field(default_factory=frozenset)

    def __init__(self, cells=()):
        object.__setattr__(self, "cells", frozenset((int(r), int(c)) for r, c in cells))

    @property
    def L(self) -> int:
        return len(self.cells)

    @property
    def k_l(self) -> int:
        return len({r for r, _ in self.cells})

    @property
    def k_c(self) -> int:
        return len({c for _, c in self.cells})

    @property
    def type(self) -> tuple[int, int, int]:
        return (self.L, self.k_l, self.k_c)

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class SneakPathType:
    L: int
    k_l: int
    k_c: int
    alpha: float | None
    prob: float


@dataclass(frozen=True)
class SneakMixture:
    """Mixture components shared by both stored bits.

    ``alphas`` uses ``inf`` for the path-free component so that
    ``1 / (alpha * r1)`` vanishes without special casing.
    """

    types: tuple[SneakPathType, ...]
    alphas: np.ndarray
    weights: np.ndarray
    truncated_mass: float

    def rho(self, bit: int, params: ChannelParams) -> np.ndarray:
        return 1.0 / (1.0 / params.r(bit) + 1.0 / (self.alphas * params.r1))

    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)


def rho(bit: int, alpha: float | None, params: ChannelParams) -> float:
    """Noise-free measured resistance of a cell storing ``bit``."""
    base = params.r(bit)
    if alpha is None:
        return base
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return 1.0 / (1.0 / base + 1.0 / (alpha * params.r1))


def solve_alpha(config: PathConfig | list) -> float:
    """Equivalent resistance of the sneak network, in units of r1.

    Nodes are the source row line, the target column line, one node per
    involved column and one per involved row.  Every cell is a unit resistor.
    The target is grounded and a unit current is injected at the source, so
    the source potential equals the equivalent resistance.
    """
    cells = config.cells if isinstance(config, PathConfig) else frozenset(config)
    if not cells:
        raise ValueError("sneak path configuration is empty")
    rows = sorted({r for r, _ in cells})
    cols = sorted({c for _, c in cells})
    # node 0: source, 1..kc: columns, kc+1..kc+kl: rows, ground: target
    col_idx = {c: 1 + k for k, c in enumerate(cols)}
    row_idx = {r: 1 + len(cols) + k for k, r in enumerate(rows)}
    size = 1 + len(cols) + len(rows)
    lap = np.zeros((size, size))

    def add(a, b):
        lap[a, a] += 1.0
        if b is None:
            return
        lap[b, b] += 1.0
        lap[a, b] -= 1.0
        lap[b, a] -= 1.0

    for c in cols:
        add(0, col_idx[c])
    for r, c in cells:
        add(col_idx[c], row_idx[r])
    for r in rows:
        add(row_idx[r], None)
    rhs = np.zeros(size)
    rhs[0] = 1.0
    try:
        potentials = np.linalg.solve(lap, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - connected by construction
        raise RuntimeError("singular sneak-path network") from exc
    return float(potentials[0])


def _grid_count(L: int, k_l: int, k_c: int) -> int:
    """L-subsets of a k_l x k_c grid touching every row and column."""
    total = 0
    for a in range(k_l + 1):
        for b in range(k_c + 1):
            total += (-1) ** (a + b) * math.comb(k_l, a) * math.comb(k_c, b) * math.comb(
                (k_l - a) * (k_c - b), L
            )
    return total


def count_arrangements(u: int, v: int, L: int, k_l: int, k_c: int) -> int:
    """Number of active-cell sets of type (L, k_l, k_c) inside a u x v grid."""
    if not (0 <= k_l <= u and 0 <= k_c <= v):
        raise ValueError("need 0 <= k_l <= u and 0 <= k_c <= v")
    if not (k_l <= L and k_c <= L and L <= k_l * k_c):
        raise ValueError("need k_l, k_c <= L <= k_l * k_c")
    return math.comb(u, k_l) * math.comb(v, k_c) * _grid_count(L, k_l, k_c)


def enumerate_types(params: ChannelParams) -> list[tuple[int, int, int]]:
    """All (L, k_l, k_c) reachable in the array with L <= l_max."""
    out = [(0, 0, 0)]
    for L in range(1, params.l_max + 1):
        for k_l in range(1, min(L, params.m - 1) + 1):
            for k_c in range(1, min(L, params.n - 1) + 1):
                if L <= k_l * k_c:
                    out.append((L, k_l, k_c))
    return out


@lru_cache(maxsize=None)
def type_alpha_classes(L: int, k_l: int, k_c: int) -> tuple[tuple[float, int], ...]:
    """Distinct equivalent resistances within a type and how many configs share each."""
    cells = [(r, c) for r in range(k_l) for c in range(k_c)]
    if math.comb(len(cells), L) > MAX_ENUMERATION:
        raise ValueError(f"type {(L, k_l, k_c)} too large to enumerate")
    classes: dict[float, int] = Counter()
    reps: dict[float, float] = {}
    for subset in itertools.combinations(cells, L):
        if len({r for r, _ in subset}) != k_l or len({c for _, c in subset}) != k_c:
            continue
        alpha = solve_alpha(subset)
        key = round(alpha, 9)
        classes[key] += 1
        reps.setdefault(key, alpha)
    return tuple(sorted((reps[k], cnt) for k, cnt in classes.items()))


def _raw_type_prob(params: ChannelParams, L: int, k_l: int, k_c: int) -> float:
    u = np.arange(params.m)[:, None]
    v = np.arange(params.n)[None, :]
    p_uv = binom.pmf(u, params.m - 1, params.q1) * binom.pmf(v, params.n - 1, params.q1)
    a = params.p_f * params.q1
    uv = u * v
    arr = np.zeros(uv.shape)
    grid = _grid_count(L, k_l, k_c)
    for uu in range(k_l, params.m):
        for vv in range(k_c, params.n):
            arr[uu, vv] = math.comb(uu, k_l) * math.comb(vv, k_c) * grid
    with np.errstate(invalid="ignore"):
        p_l = np.where(uv >= L, a**L * (1.0 - a) ** np.maximum(uv - L, 0), 0.0)
    return float(np.sum(arr * p_uv * p_l))


@lru_cache(maxsize=256)
def _type_table(m, n, p_f, q1, l_max) -> tuple[tuple[tuple[int, int, int], float], ...]:
    params = ChannelParams(m=m, n=n, p_f=p_f, q1=q1, l_max=l_max)
    return tuple((t, _raw_type_prob(params, *t)) for t in enumerate_types(params))


def _key(params: ChannelParams):
    return (params.m, params.n, params.p_f, params.q1, params.l_max)


def type_distribution(params: ChannelParams, renormalize: bool = True) -> dict:
    """Probability of each sneak-path type, tail beyond l_max dropped."""
    table = _type_table(*_key(params))
    total = sum(p for _, p in table) if renormalize else 1.0
    return {t: p / total for t, p in table}


def p_lambda(params: ChannelParams, type_: tuple[int, int, int]) -> float:
    L, k_l, k_c = type_
    if L > params.l_max:
        raise ValueError(f"L={L} exceeds l_max={params.l_max}")
    return type_distribution(params).get(tuple(type_), 0.0)


@lru_cache(maxsize=256)
def _mixture(m, n, p_f, q1, l_max) -> SneakMixture:
    table = _type_table(m, n, p_f, q1, l_max)
    total = sum(p for _, p in table)
    types = []
    for (L, k_l, k_c), p in table:
        prob = p / total
        if L == 0:
            types.append(SneakPathType(0, 0, 0, None, prob))
            continue
        classes = type_alpha_classes(L, k_l, k_c)
        n_cfg = sum(cnt for _, cnt in classes)
        for alpha, cnt in classes:
            types.append(SneakPathType(L, k_l, k_c, alpha, prob * cnt / n_cfg))
    # Mixture components with identical alpha collapse into one.
    merged: dict[float, float] = defaultdict(float)
    rep: dict[float, float] = {}
    for t in types:
        a = math.inf if t.alpha is None else t.alpha
        k = a if math.isinf(a) else round(a, 9)
        merged[k] += t.prob
        rep.setdefault(k, a)
    keys = sorted(merged, reverse=True)
    alphas = np.array([rep[k] for k in keys])
    weights = np.array([merged[k] for k in keys])
    return SneakMixture(tuple(types), alphas, weights, truncated_mass=1.0 - total)


def sneak_mixture(params: ChannelParams) -> SneakMixture:
    """Mixture weights and alphas for the given array statistics (cached)."""
    return _mixture(*_key(params))


def transition_pdf(r, bit: int, params: ChannelParams, n_reads: int = 1):
    """Density of the (read-averaged) measured resistance given the stored bit."""
    mix = sneak_mixture(params)
    mu = mix.rho(bit, params)
    sigma = params.sigma_eta / math.sqrt(n_reads)
    r = np.asarray(r, dtype=float)
    dens = norm.pdf(r[..., None], loc=mu, scale=sigma) @ mix.weights
    return dens if dens.ndim else float(dens)


# ---------------------------------------------------------------------------
# exact array-level simulation


def sample_array(params: ChannelParams, rng: np.random.Generator, size: int | None = None):
    """Draw cell bits and selector failures, both i.i.d. Bernoulli.

    Returns boolean arrays of shape ``(m, n)`` or ``(size, m, n)``.
    """
    shape = (params.m, params.n) if size is None else (size, params.m, params.n)
    bits = rng.random(shape, dtype=np.float32) < params.q1 if 0 < params.q1 < 1 else np.full(shape, params.q1 >= 1)
    fails = rng.random(shape, dtype=np.float32) < params.p_f if 0 < params.p_f < 1 else np.full(shape, params.p_f >= 1)
    return bits, fails


def cell_path_config(arrays, i: int, j: int) -> PathConfig:
    """Exact set of active intersection cells for target ``(i, j)``."""
    bits, fails = arrays
    bits = np.asarray(bits, dtype=bool)
    fails = np.asarray(fails, dtype=bool)
    col_j = bits[:, j].copy()
    col_j[i] = False
    row_i = bits[i, :].copy()
    row_i[j] = False
    active = col_j[:, None] & row_i[None, :] & bits & fails
    return PathConfig(zip(*np.nonzero(active)))


def active_cells_batch(bits, fails, i, j):
    """Vectorised active-cell masks for a batch of arrays and target cells."""
    idx = np.arange(bits.shape[0])
    col_j = bits[idx, :, j]
    row_i = bits[idx, i, :]
    col_j[idx, i] = False
    row_i[idx, j] = False
    return col_j[:, :, None] & row_i[:, None, :] & bits & fails


def _canonical_key(active: np.ndarray) -> bytes:
    sub = active[np.any(active, axis=1)][:, np.any(active, axis=0)]
    # cheap partial canonicalisation; only used as a cache key
    sub = sub[np.lexsort(sub.T[::-1])]
    sub = sub[:, np.lexsort(sub[::-1])]
    return sub.shape[0].to_bytes(2, "little") + np.packbits(sub).tobytes()


_alpha_cache: dict[bytes, float] = {}


def alpha_of_active(active: np.ndarray) -> float:
    """alpha for a boolean active-cell mask; inf when empty."""
    count = int(active.sum())
    if count == 0:
        return math.inf
    if count == 1:
        return 3.0
    key = _canonical_key(active)
    alpha = _alpha_cache.get(key)
    if alpha is None:
        alpha = solve_alpha(list(zip(*np.nonzero(active))))
        _alpha_cache[key] = alpha
    return alpha


def alphas_from_masks(active: np.ndarray) -> np.ndarray:
    """alpha per leading-axis entry of a stack of (m, n) masks."""
    counts = active.reshape(active.shape[0], -1).sum(axis=1)
    alphas = np.full(active.shape[0], math.inf)
    alphas[counts == 1] = 3.0
    for k in np.nonzero(counts >= 2)[0]:
        alphas[k] = alpha_of_active(active[k])
    return alphas


def sample_reads(bit: int, config: PathConfig, n_reads: int, params: ChannelParams,
                 rng: np.random.Generator) -> np.ndarray:
    """N noisy reads of one cell; the sneak state is frozen across reads."""
    if n_reads < 1:
        raise ValueError("need at least one read")
    alpha = solve_alpha(config) if len(config) else None
    mean = rho(bit, alpha, params)
    return mean + params.sigma_eta * rng.standard_normal(n_reads)


def mc_type_histogram(params: ChannelParams, trials: int, rng: np.random.Generator,
                      batch: int = 20_000) -> dict:
    """Empirical (L, k_l, k_c) frequencies at uniformly random target cells."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts: Counter = Counter()
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        bits, fails = sample_array(params, rng, size=b)
        i = rng.integers(params.m, size=b)
        j = rng.integers(params.n, size=b)
        active = active_cells_batch(bits, fails, i, j)
        L = active.sum(axis=(1, 2))
        k_l = active.any(axis=2).sum(axis=1)
        k_c = active.any(axis=1).sum(axis=1)
        keys, cnt = np.unique(np.stack([L, k_l, k_c], axis=1), axis=0, return_counts=True)
        for key, c in zip(keys, cnt):
            counts[tuple(int(x) for x in key)] += int(c)
        done += b
    return {k: v / trials for k, v in sorted(counts.items())}
