"""Array-level Monte Carlo: exact sneak networks, frozen across the N reads.

Unlike the analytical mixture, nothing here is truncated at ``l_max``:
every sneak configuration drawn is solved as a resistor network.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelParams, active_cells_batch, alphas_from_masks, sample_array

CELL_BATCH = 20_000
FRAME_BATCH = 200


def _means(bits: np.ndarray, alphas: np.ndarray, params: ChannelParams) -> np.ndarray:
    base = np.where(bits, params.r1, params.r0)
    return 1.0 / (1.0 / base + 1.0 / (alphas * params.r1))


def simulate_cells(params: ChannelParams, n_cells: int, n_reads: int, rng: np.random.Generator,
                   batch: int = CELL_BATCH):
    """Yield ``(bits, reads)`` batches for uniformly random target cells.

    Each cell lives in its own freshly drawn array.
    """
    done = 0
    while done < n_cells:
        b = min(batch, n_cells - done)
        bits, fails = sample_array(params, rng, size=b)
        i = rng.integers(params.m, size=b)
        j = rng.integers(params.n, size=b)
        active = active_cells_batch(bits, fails, i, j)
        target = bits[np.arange(b), i, j]
        mean = _means(target, alphas_from_masks(active), params)
        reads = mean[:, None] + params.sigma_eta * rng.standard_normal((b, n_reads))
        yield target.astype(np.uint8), reads
        done += b


def frame_targets(params: ChannelParams, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major cell positions holding the first ``length`` code bits."""
    if length > params.m * params.n:
        raise ValueError("codeword does not fit in one array")
    k = np.arange(length)
    return k // params.n, k % params.n


def simulate_frames(params: ChannelParams, codewords: np.ndarray, n_reads: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Store each codeword in its own array and read every code cell N times.

    Returns reads of shape ``(frames, length, n_reads)``.
    """
    codewords = np.asarray(codewords, dtype=bool)
    frames, length = codewords.shape
    rows, cols = frame_targets(params, length)
    bits, fails = sample_array(params, rng, size=frames)
    flat = bits.reshape(frames, -1)
    flat[:, :length] = codewords
    live = bits & fails
    col_j = np.transpose(bits[:, :, cols], (0, 2, 1)).copy()  # (B, T, m)
    row_i = bits[:, rows, :].copy()  # (B, T, n)
    t = np.arange(length)
    col_j[:, t, rows] = False
    row_i[:, t, cols] = False
    active = col_j[:, :, :, None] & row_i[:, :, None, :] & live[:, None, :, :]
    alphas = alphas_from_masks(active.reshape(-1, params.m, params.n)).reshape(frames, length)
    mean = _means(codewords, alphas, params)
    return mean[..., None] + params.sigma_eta * rng.standard_normal((frames, length, n_reads))
