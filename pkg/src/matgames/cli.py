"""Command line entry point: ``python -m matgames <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .adversaries import InstanceTooSmall
from .core import dump_matrix, load_matrix
from .harness import (
    ExperimentConfig,
    Mode,
    load_config_file,
    parse_seed_range,
    psd_scan,
    run_lower_bound,
    run_lower_seed,
    run_upper_rate,
    stat_test_projected_gaussian,
)
from .oracles import Transcript, replay_verify

# built-in defaults; a --config file overrides these and explicit flags override both
DEFAULTS = {
    "mode": "l2", "algo": None, "T": 8, "n": 4096, "d": 64, "delta": None,
    "seeds": "0..0", "out": None, "json": None, "resample": False, "probe": False,
    "tol_replay": 1e-9, "tol_nonsep": 1e-9, "tol_witness": 1e-9, "eps": 0.1,
    "q": 256, "basis": 32, "beta": 1.0, "trials": 100_000, "z": "3,4",
    "matrix": None, "transcript": None,
}
DEFAULT_ALGO = {"l2": "agd_smoothed", "l1": "mirror_prox", "onesided": "perceptron",
                "upper": "perceptron"}
CASTS = {"T": int, "n": int, "d": int, "q": int, "basis": int, "trials": int,
         "delta": float, "beta": float, "eps": float,
         "tol_replay": float, "tol_nonsep": float, "tol_witness": float}


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matgames", description="Oracle lower-bound experiments for matrix games.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file mirroring the flags")
        p.add_argument("--seeds", help="inclusive seed range A..B")
        p.add_argument("--out", help="CSV output path (JSON summary goes next to it)")
        p.add_argument("--json", help="explicit JSON summary path")
        p.add_argument("-v", "--verbose", action="store_true")

    def instance(p):
        p.add_argument("--mode", choices=["l2", "l1", "onesided"])
        p.add_argument("--algo")
        p.add_argument("--T", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--eps", type=float, help="smoothing accuracy for agd_smoothed")
        p.add_argument("--tol-replay", type=float)
        p.add_argument("--tol-nonsep", type=float)
        p.add_argument("--tol-witness", type=float)
        p.add_argument("--resample", action="store_true", default=None,
                       help="redraw failed seeds (alters the construction's distribution)")
        p.add_argument("--probe", action="store_true", default=None,
                       help="search for a separator of the T-term factor sum")

    p = sub.add_parser("lower", help="adversary vs. algorithm sweep")
    common(p)
    instance(p)

    p = sub.add_parser("dump", help="write one finalized adversarial matrix and its transcript")
    common(p)
    instance(p)
    p.add_argument("--transcript", help="transcript JSON path")

    p = sub.add_parser("upper", help="solver rate runs on structured instances")
    common(p)
    p.add_argument("--algo", choices=["perceptron", "agd_smoothed", "mirror_prox"])
    p.add_argument("--T", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--eps", type=float, help="planted margin for agd_smoothed")

    p = sub.add_parser("stat", help="projected Gaussian tail bounds")
    common(p)
    p.add_argument("--q", type=int)
    p.add_argument("--basis", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--z", help="comma separated thresholds")

    p = sub.add_parser("psd", help="tridiagonal PSD threshold scan for T = 2..T")
    common(p)
    p.add_argument("--T", type=int)

    p = sub.add_parser("replay", help="replay a transcript against a matrix file")
    p.add_argument("--config")
    p.add_argument("--matrix")
    p.add_argument("--transcript")
    p.add_argument("--tol-replay", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and explicit flags, in that order."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        opts.update(load_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command"):
            opts[key] = value
    for key, cast in CASTS.items():
        if opts.get(key) is not None:
            opts[key] = cast(opts[key])
    opts["resample"] = _bool(opts["resample"])
    opts["probe"] = _bool(opts["probe"])
    return opts


def _experiment(opts: dict, mode: str) -> ExperimentConfig:
    return ExperimentConfig(
        mode=Mode(mode), algorithm=opts["algo"] or DEFAULT_ALGO[mode], T=opts["T"],
        n=opts["n"], d=opts["d"], delta=opts["delta"], seeds=parse_seed_range(opts["seeds"]),
        tol_replay=opts["tol_replay"], tol_nonsep=opts["tol_nonsep"], tol_witness=opts["tol_witness"],
        out_csv=opts["out"], out_json=opts["json"], resample=opts["resample"],
        probe=opts["probe"], eps=opts["eps"],
    )


def _emit(report: dict, opts: dict) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if opts.get("json") or opts.get("out"):
        with open(opts.get("json") or opts["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = resolve(args)
    cmd = args.command
    try:
        if cmd in ("lower", "upper"):
            summary = (run_lower_bound if cmd == "lower" else run_upper_rate)(
                _experiment(opts, opts["mode"] if cmd == "lower" else "upper"))
            summary.write()
            if not summary.config.out_csv:
                sys.stdout.write(summary.to_csv())
            print(f"success {sum(summary.passes)}/{len(summary.passes)}", file=sys.stderr)
            return 0
        if cmd == "dump":
            cfg = _experiment(opts, opts["mode"])
            res = run_lower_seed(cfg, cfg.seeds[0])
            if not opts["out"]:
                raise SystemExit("dump needs --out for the matrix file")
            dump_matrix(res.matrix, opts["out"])
            res.transcript.save(opts["transcript"] or opts["out"] + ".transcript.json")
            print(json.dumps(res.certificate.csv_row(), sort_keys=True))
            return 0 if res.certificate.all_pass else 1
        if cmd == "replay":
            if not (opts["matrix"] and opts["transcript"]):
                raise SystemExit("replay needs --matrix and --transcript")
            err, ok = replay_verify(load_matrix(opts["matrix"]), Transcript.load(opts["transcript"]),
                                    opts["tol_replay"])
            print(json.dumps({"replay_max_err": err, "pass": ok}))
            return 0 if ok else 1
        if cmd == "stat":
            z = [float(s) for s in str(opts["z"]).split(",") if s.strip()]
            report = stat_test_projected_gaussian(opts["q"], opts["basis"], opts["beta"], opts["trials"], z,
                                                  seed=parse_seed_range(opts["seeds"])[0])
        else:
            report = psd_scan(opts["T"])
        _emit(report, opts)
        return 0 if report["passed"] else 1
    except InstanceTooSmall as exc:
        print(f"instance too small: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
