"""Command line entry point: ``crossbar-quant <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .channel import ChannelParams, sneak_mixture, type_alpha_classes, type_distribution
from .ecc import llr_table
from .harness import ExperimentConfig, rows_to_csv
from .map_detector import bep_map_mc, bep_map_quadrature_1d
from .quantizer import design_dp
from .threshold import bac_from_threshold, bac_mi, optimize_threshold_bisection

log = logging.getLogger("crossbar_quant")

BEP_HEADER = ["sigma_eta", "N", "bep", "ci95", "trials", "method"]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.out is not None:
        cfg.out = args.out
    for attr in ("sigma", "reads", "bits", "detectors", "trials", "frames", "code", "mc_trials", "h"):
        value = getattr(args, attr, None)
        if value is None:
            continue
        target = {"sigma": "sweep", "bits": "quant_bits"}.get(attr, attr)
        setattr(cfg, target, value)
    return cfg


def _params(args) -> ChannelParams:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return cfg.params


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _maybe_plot(args, out: str | None) -> None:
    if not getattr(args, "plot", False):
        return
    if not out:
        log.warning("--plot needs --out; skipping figure")
        return
    from .plotting import render_csv

    image = render_csv(out)
    Path(out).with_suffix(".gp").write_text(harness.emit_plot_script(out))
    log.info("wrote %s", image)


def cmd_design_quantizer(args) -> int:
    params = _params(args).with_sigma(args.sigma)
    quant, mi = design_dp(params, args.reads, args.bits, args.h)
    payload = json.loads(quant.to_json())
    payload["mi_bits"] = mi
    payload["llr_nats"] = llr_table(quant, params, args.reads).tolist()
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_design_threshold(args) -> int:
    params = _params(args).with_sigma(args.sigma)
    det = optimize_threshold_bisection(params, args.reads, args.ns)
    bac = bac_from_threshold(det.t1, params, args.reads)
    payload = {"t1_star_ohm": det.t1, "mi_bits": bac_mi(bac), "p0": bac.p0, "p1": bac.p1}
    if det.degenerate:
        payload["degenerate"] = True
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_sweep(kind):
    runner = {"mi": harness.run_mi_sweep, "ber": harness.run_uncoded_ber, "fer": harness.run_coded_fer}[kind]

    def run(args) -> int:
        cfg = _load_config(args)
        rows = runner(cfg)
        _emit(rows_to_csv(rows), cfg.out)
        _maybe_plot(args, cfg.out)
        return 0

    return run


def cmd_bep_map(args) -> int:
    params = _params(args)
    sigmas = args.sigma or [params.sigma_eta]
    rows = []
    for k, sigma in enumerate(sigmas):
        p = params.with_sigma(sigma)
        for n in args.reads:
            if args.method == "quadrature":
                if n != 1:
                    raise SystemExit("quadrature BEP is only available for a single read")
                est = bep_map_quadrature_1d(p)
            else:
                rng = np.random.default_rng(np.random.SeedSequence(args.seed or 0, spawn_key=(4, k, n)))
                est = bep_map_mc(p, n, args.trials, rng, stratified=args.stratified)
            rows.append([float(sigma), n, est.value, est.ci95, est.trials, est.method])
    out = args.out
    _emit(rows_to_csv(rows, BEP_HEADER), out)
    _maybe_plot(args, out)
    return 0


def cmd_alpha_table(args) -> int:
    params = _params(args)
    dist = type_distribution(params)
    rows = []
    for (L, k_l, k_c), prob in dist.items():
        if L == 0:
            rows.append([0, 0, 0, "inf", 1, prob])
            continue
        classes = type_alpha_classes(L, k_l, k_c)
        total = sum(c for _, c in classes)
        for alpha, count in classes:
            rows.append([L, k_l, k_c, alpha, count, prob * count / total])
    text = rows_to_csv(rows, ["L", "k_l", "k_c", "alpha", "configs", "prob"])
    mix = sneak_mixture(params)
    text += f"# truncated_mass={mix.truncated_mass!r}\n"
    _emit(text, args.out)
    return 0


def cmd_plot(args) -> int:
    from .plotting import render_csv

    print(render_csv(args.csv, args.image))
    return 0


def cmd_plot_script(args) -> int:
    _emit(harness.emit_plot_script(args.csv), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossbar-quant", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with channel and experiment settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("design-quantizer", parents=[common], help="DP quantizer design")
    p.add_argument("--sigma", type=float, default=80.0)
    p.add_argument("--reads", type=int, default=1)
    p.add_argument("--bits", type=int, default=3)
    p.add_argument("--h", type=int, default=1000)
    p.set_defaults(func=cmd_design_quantizer)

    p = sub.add_parser("design-threshold", parents=[common], help="bisection threshold design")
    p.add_argument("--sigma", type=float, default=80.0)
    p.add_argument("--reads", type=int, default=1)
    p.add_argument("--ns", type=int, default=128)
    p.set_defaults(func=cmd_design_threshold)

    for name, kind, extra in (
        ("mi-sweep", "mi", ("bits", "mc_trials", "h")),
        ("ber", "ber", ("detectors", "trials")),
        ("fer", "fer", ("detectors", "frames", "code")),
    ):
        p = sub.add_parser(name, parents=[common], help=f"{kind} sweep to CSV")
        p.add_argument("--sigma", type=_floats, help="comma separated sigma values (ohm)")
        p.add_argument("--reads", type=_ints, help="comma separated read counts")
        p.add_argument("--plot", action="store_true", help="render a PNG next to --out")
        if "bits" in extra:
            p.add_argument("--bits", type=_ints, help="comma separated quantization bits")
            p.add_argument("--mc-trials", dest="mc_trials", type=int)
            p.add_argument("--h", type=int)
        if "detectors" in extra:
            p.add_argument("--detectors", type=lambda s: s.split(","))
        if "trials" in extra:
            p.add_argument("--trials", type=int)
        if "frames" in extra:
            p.add_argument("--frames", type=int)
        if "code" in extra:
            p.add_argument("--code", choices=["bch127-113", "bch127-92"])
        p.set_defaults(func=cmd_sweep(kind))

    p = sub.add_parser("bep-map", parents=[common], help="MAP bit-error probability")
    p.add_argument("--sigma", type=_floats)
    p.add_argument("--reads", type=_ints, default=[1])
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--method", choices=["mc", "quadrature"], default="mc")
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_bep_map)

    p = sub.add_parser("alpha-table", parents=[common], help="sneak-path types, alphas, probabilities")
    p.set_defaults(func=cmd_alpha_table)

    p = sub.add_parser("plot", help="render a result CSV to an image")
    p.add_argument("csv")
    p.add_argument("--image")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("plot-script", help="gnuplot script for a result CSV")
    p.add_argument("csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot_script)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
