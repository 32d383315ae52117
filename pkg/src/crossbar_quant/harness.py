"""Seeded sweeps: MI of designed quantizers, uncoded BER and BCH-coded FER.

Trials are split into fixed-size chunks, each with its own RNG stream
derived from ``(seed, experiment, sigma index, chunk index)``.  Results are
merged by adding counts, so output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams
from .ecc import BchCode
from .map_detector import map_detect
from .quantizer import design_dp, fine_channel, fine_grid, mi_multiread_exact_mc, mutual_information
from .simulate import FRAME_BATCH, simulate_cells, simulate_frames
from .stats import wilson_interval
from .threshold import (
    bac_from_threshold,
    bac_mi,
    baseline_single_read_threshold,
    optimize_threshold_bisection,
    threshold_detect,
)

CSV_HEADER = ["sigma_eta", "N", "q", "detector", "code", "metric", "value", "ci95", "trials"]
DETECTORS = ("threshold-optimized", "threshold-baseline", "map")
CELL_CHUNK = 100_000
FRAME_CHUNK = 1_000

_EXPERIMENT_TAGS = {"mi": 1, "ber": 2, "fer": 3}


@dataclass
class ExperimentConfig:
    params: ChannelParams = field(default_factory=ChannelParams)
    sweep: list = field(default_factory=lambda: [float(s) for s in range(20, 121, 10)])
    reads: list = field(default_factory=lambda: [1, 2, 4])
    quant_bits: list = field(default_factory=lambda: [1, 3])
    detectors: list = field(default_factory=lambda: list(DETECTORS))
    code: str | None = None
    trials: int = 1_000_000
    frames: int = 10_000
    seed: int = 0
    h: int = 1000
    ns: int = 128
    mc_trials: int = 0
    jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        if not self.sweep:
            raise ValueError("sigma sweep must not be empty")
        if self.trials < 1 or self.frames < 1:
            raise ValueError("trials and frames must be >= 1")

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        params = ChannelParams.from_json_dict(data)
        kwargs = {}
        mapping = {
            "sweep_sigma_ohm": "sweep", "reads": "reads", "quant_bits": "quant_bits",
            "detectors": "detectors", "code": "code", "trials": "trials", "frames": "frames",
            "seed": "seed", "h": "h", "ns": "ns", "mc_trials": "mc_trials", "jobs": "jobs",
            "out": "out",
        }
        for key, attr in mapping.items():
            if key in data:
                kwargs[attr] = data[key]
        return cls(params=params, **kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    def to_json_dict(self) -> dict:
        out = self.params.to_json_dict()
        out.update(
            sweep_sigma_ohm=self.sweep, reads=self.reads, quant_bits=self.quant_bits,
            detectors=self.detectors, code=self.code, trials=self.trials, frames=self.frames,
            seed=self.seed, h=self.h, ns=self.ns, mc_trials=self.mc_trials, jobs=self.jobs,
            out=self.out,
        )
        return out


@dataclass
class ResultRow:
    sigma_eta: float
    N: int
    q: str
    detector: str
    code: str
    metric: str
    value: float
    ci95: float
    trials: int

    def as_list(self) -> list[str]:
        return [_fmt(v) for v in asdict(self).values()]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def rows_to_csv(rows, header=CSV_HEADER) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row.as_list() if isinstance(row, ResultRow) else [_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(rows, path, header=CSV_HEADER) -> None:
    Path(path).write_text(rows_to_csv(rows, header))


def read_csv(path) -> list[dict]:
    text = Path(path).read_text()
    if not text.strip():
        return []
    return list(csv.DictReader(io.StringIO(text)))


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _map_chunks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _chunks(total: int, size: int) -> list[int]:
    return [min(size, total - k) for k in range(0, total, size)]


# ---------------------------------------------------------------------------
# detectors


def detector_thresholds(params: ChannelParams, detectors, reads, ns: int = 128) -> dict:
    """Threshold per (detector, N); MAP entries map to ``None``."""
    out = {}
    baseline = None
    for det in detectors:
        for n in reads:
            if det == "threshold-optimized":
                out[det, n] = optimize_threshold_bisection(params, n, ns).t1
            elif det == "threshold-baseline":
                if baseline is None:
                    baseline = baseline_single_read_threshold(params)
                out[det, n] = baseline
            elif det == "map":
                out[det, n] = None
            elif det.startswith("threshold@"):
                out[det, n] = float(det.split("@", 1)[1])
            else:
                raise ValueError(f"unknown detector {det!r}")
    return out


def _decide(reads: np.ndarray, threshold, params: ChannelParams) -> np.ndarray:
    if threshold is None:
        return map_detect(reads, params)
    return threshold_detect(reads, threshold)


# ---------------------------------------------------------------------------
# MI sweep


def run_mi_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """Best achievable MI per (sigma, N, q) from the DP design.

    q=1 rows are repeated with the bisection threshold.  With ``mc_trials``
    set, the unquantized exact N-read MI and the averaged fine-grid MI are
    added as ``q=inf`` rows.
    """
    rows = []
    for si, sigma in enumerate(config.sweep):
        params = config.params.with_sigma(sigma)
        for n in config.reads:
            for q in config.quant_bits:
                _, mi = design_dp(params, n, q, config.h)
                rows.append(ResultRow(float(sigma), n, str(q), "dp", "", "mi_bits", mi, 0.0, 0))
                if q == 1:
                    det = optimize_threshold_bisection(params, n, config.ns)
                    mi_b = bac_mi(bac_from_threshold(det.t1, params, n))
                    rows.append(ResultRow(float(sigma), n, "1", "bisection", "", "mi_bits", mi_b, 0.0, 0))
            if config.mc_trials:
                grid = fine_grid(params, config.h)
                mi_avg = mutual_information(fine_channel(grid, params, n))
                rows.append(ResultRow(float(sigma), n, "inf", "averaged", "", "mi_bits", mi_avg, 0.0, 0))
                est, ci = mi_multiread_exact_mc(params, n, None, config.mc_trials,
                                                _stream(config.seed, _EXPERIMENT_TAGS["mi"], si, n))
                rows.append(ResultRow(float(sigma), n, "inf", "exact-mc", "", "mi_bits", est, ci,
                                      config.mc_trials))
    return rows


# ---------------------------------------------------------------------------
# uncoded BER


def _ber_chunk(task):
    params, reads, thresholds, count, seed, key = task
    rng = _stream(seed, *key)
    errors = {k: 0 for k in thresholds}
    n_max = max(reads)
    for bits, r in simulate_cells(params, count, n_max, rng):
        for (det, n), thr in thresholds.items():
            errors[det, n] += int(np.count_nonzero(_decide(r[:, :n], thr, params) != bits))
    return errors


def run_uncoded_ber(config: ExperimentConfig) -> list[ResultRow]:
    """Per-cell BER from exact array simulation.

    Every detector and read count is evaluated on the same simulated cells;
    N-read results use the first N reads of each cell.
    """
    rows = []
    for si, sigma in enumerate(config.sweep):
        params = config.params.with_sigma(sigma)
        thresholds = detector_thresholds(params, config.detectors, config.reads, config.ns)
        tasks = [
            (params, list(config.reads), thresholds, count, config.seed,
             (_EXPERIMENT_TAGS["ber"], si, ci))
            for ci, count in enumerate(_chunks(config.trials, CELL_CHUNK))
        ]
        totals = {k: 0 for k in thresholds}
        for part in _map_chunks(_ber_chunk, tasks, config.jobs):
            for k, v in part.items():
                totals[k] += v
        for n in config.reads:
            for det in config.detectors:
                e = totals[det, n]
                lo, hi = wilson_interval(e, config.trials)
                rows.append(ResultRow(float(sigma), n, "1", det, "", "ber", e / config.trials,
                                      0.5 * (hi - lo), config.trials))
    return rows


# ---------------------------------------------------------------------------
# coded FER


def _fer_chunk(task):
    params, reads, thresholds, code_id, count, seed, key = task
    rng = _stream(seed, *key)
    code = BchCode.from_id(code_id)
    frame_err = {k: 0 for k in thresholds}
    bit_err = {k: 0 for k in thresholds}
    n_max = max(reads)
    for start in range(0, count, FRAME_BATCH):
        b = min(FRAME_BATCH, count - start)
        msgs = rng.integers(0, 2, size=(b, code.k_code), dtype=np.uint8)
        words = code.encode(msgs)
        r = simulate_frames(params, words, n_max, rng)
        for (det, n), thr in thresholds.items():
            hard = _decide(r[..., :n], thr, params).astype(np.uint8)
            bit_err[det, n] += int(np.count_nonzero(hard != words))
            decoded, ok = code.decode_batch(hard)
            wrong = ~ok | np.any(decoded != msgs, axis=1)
            frame_err[det, n] += int(np.count_nonzero(wrong))
    return frame_err, bit_err


def run_coded_fer(config: ExperimentConfig) -> list[ResultRow]:
    """FER of hard-decision BCH decoding, one codeword per array."""
    code = BchCode.from_id(config.code or "bch127-113")
    rows = []
    for si, sigma in enumerate(config.sweep):
        params = config.params.with_sigma(sigma)
        thresholds = detector_thresholds(params, config.detectors, config.reads, config.ns)
        tasks = [
            (params, list(config.reads), thresholds, code.name, count, config.seed,
             (_EXPERIMENT_TAGS["fer"], si, ci))
            for ci, count in enumerate(_chunks(config.frames, FRAME_CHUNK))
        ]
        frames = {k: 0 for k in thresholds}
        bits = {k: 0 for k in thresholds}
        for fe, be in _map_chunks(_fer_chunk, tasks, config.jobs):
            for k in thresholds:
                frames[k] += fe[k]
                bits[k] += be[k]
        for n in config.reads:
            for det in config.detectors:
                e = frames[det, n]
                lo, hi = wilson_interval(e, config.frames)
                rows.append(ResultRow(float(sigma), n, "1", det, code.name, "fer",
                                      e / config.frames, 0.5 * (hi - lo), config.frames))
                nb = config.frames * code.n_code
                lo, hi = wilson_interval(bits[det, n], nb)
                rows.append(ResultRow(float(sigma), n, "1", det, code.name, "ber_raw",
                                      bits[det, n] / nb, 0.5 * (hi - lo), nb))
    return rows


# ---------------------------------------------------------------------------
# plot scripts

LOG_METRICS = {"ber", "fer", "ber_raw", "bep"}


def _series(records: list[dict]) -> dict:
    groups: dict = {}
    for rec in records:
        metric = rec.get("metric") or ("bep" if "bep" in rec else "value")
        label_parts = [rec.get(k, "") for k in ("detector", "method", "code") if rec.get(k)]
        if rec.get("q"):
            label_parts.append(f"q={rec['q']}")
        label_parts.append(f"N={rec.get('N', '')}")
        key = (metric, " ".join(label_parts))
        value = rec.get("value", rec.get("bep"))
        groups.setdefault(key, []).append((float(rec["sigma_eta"]), float(value), float(rec.get("ci95") or 0)))
    return groups


def emit_plot_script(csv_path) -> str:
    """gnuplot script plotting every series of a result CSV against sigma."""
    records = read_csv(csv_path)
    groups = _series(records)
    metrics = {m for m, _ in groups}
    lines = [
        f"# plot of {Path(csv_path).name}",
        "set xlabel 'sigma_eta (ohm)'",
        "set key outside right",
        "set grid",
    ]
    if metrics & LOG_METRICS:
        lines += ["set logscale y", "set format y '10^{%L}'"]
    ylabel = "/".join(sorted(metrics)) or "value"
    lines.append(f"set ylabel '{ylabel}'")
    plots = []
    for k, ((metric, label), pts) in enumerate(sorted(groups.items())):
        name = f"$s{k}"
        lines.append(f"{name} << EOD")
        lines += [f"{x!r} {y!r} {c!r}" for x, y, c in sorted(pts)]
        lines.append("EOD")
        plots.append(f"{name} using 1:2 with linespoints title '{label}'")
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
