"""``rnn-surgery`` command line: convert, verify, approx-demo, bounds, regress.

Exit codes: 0 success, 1 verification failed, 2 bad input, 3 shape error,
4 training failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .networks import DimensionError, FeedforwardNet, ModifiedRecurrentNet, RecurrentNet, eval_fnn, eval_mrnn, eval_rnn, vec
from .serialization import NetworkFormatError, load_network, save_network, sequence_length_hint

EXIT_OK, EXIT_MISMATCH, EXIT_BAD_INPUT, EXIT_SHAPE, EXIT_TRAINING = 0, 1, 2, 3, 4

log = logging.getLogger("rnn_surgery")


class BadInput(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    outputs: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def load_config(path) -> dict:
    """JSON, or TOML when the file ends in ``.toml``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise BadInput(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except ValueError as exc:
        raise BadInput(f"cannot parse config {path}: {exc}") from exc


def _load(path):
    try:
        return load_network(path)
    except NetworkFormatError as exc:
        raise BadInput(str(exc)) from exc


def _shape(net) -> str:
    return f"W={net.width} L={net.depth}"


# ---------------------------------------------------------------------------
# convert / verify
# ---------------------------------------------------------------------------


def cmd_convert(args) -> int:
    from .conversion import fnn_to_rnn, mrnn_to_rnn, rnn_to_fnn

    net = _load(args.inp)
    N = args.len or sequence_length_hint(args.inp) or args.t0
    t0 = args.t0
    expected = {"fnn2rnn": FeedforwardNet, "rnn2fnn": RecurrentNet, "mrnn2rnn": ModifiedRecurrentNet}[args.direction]
    if not isinstance(net, expected):
        raise BadInput(f"{args.direction} expects a {expected.__name__}, got {type(net).__name__}")
    if args.direction == "fnn2rnn":
        out = fnn_to_rnn(net, t0, N)
    elif args.direction == "rnn2fnn":
        out = rnn_to_fnn(net, t0, N)
    else:
        out = mrnn_to_rnn(net, (0.0, 1.0), N=N)
    out_path = Path(args.out)
    save_network(out, out_path, N=N if isinstance(out, RecurrentNet) else None)
    print(f"{args.direction}: {_shape(net)} -> {_shape(out)}")
    RunManifest("convert", {"direction": args.direction, "in": str(args.inp), "t0": t0, "N": N}, None,
                outputs=[str(out_path)]).write(_manifest_path(out_path))
    return EXIT_OK


def _outputs_at(net, X, t0):
    if isinstance(net, FeedforwardNet):
        return eval_fnn(net, vec(X[:, :, :t0]))
    fn = eval_mrnn if isinstance(net, ModifiedRecurrentNet) else eval_rnn
    return fn(net, X)[:, :, t0 - 1]


def _token_dim(net, t0):
    if isinstance(net, FeedforwardNet):
        if net.input_dim % t0:
            raise DimensionError(f"FNN input dim {net.input_dim} is not a multiple of t0={t0}")
        return net.input_dim // t0
    return net.input_dim


def cmd_verify(args) -> int:
    a, b = _load(args.a), _load(args.b)
    t0 = args.t0
    N = args.len or sequence_length_hint(args.a) or sequence_length_hint(args.b) or t0
    if not 1 <= t0 <= N:
        raise DimensionError(f"need 1 <= t0 <= N, got t0={t0}, N={N}")
    d_x = _token_dim(a, t0)
    if _token_dim(b, t0) != d_x or a.output_dim != b.output_dim:
        raise DimensionError("networks disagree on token or output dimension")
    lo, hi = args.domain
    rng = np.random.default_rng(args.seed)
    X = rng.uniform(lo, hi, size=(args.samples, d_x, N))
    diff = float(np.abs(_outputs_at(a, X, t0) - _outputs_at(b, X, t0)).max())
    ok = diff <= args.threshold
    print(f"max_abs_diff={diff!r} threshold={args.threshold!r} samples={args.samples} t0={t0} N={N} -> {'OK' if ok else 'MISMATCH'}")
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps({"max_abs_diff": diff, "ok": ok}, sort_keys=True) + "\n")
        RunManifest("verify", {"a": str(args.a), "b": str(args.b), "t0": t0, "N": N, "samples": args.samples,
                               "domain": [lo, hi], "threshold": args.threshold}, args.seed,
                    outputs=[str(out)]).write(_manifest_path(out))
    return EXIT_OK if ok else EXIT_MISMATCH


# ---------------------------------------------------------------------------
# approx-demo
# ---------------------------------------------------------------------------

DEFAULT_APPROX_CONFIG = {
    "target": "two-step-demo",
    "N": 2,
    "d_x": 1,
    "resolutions": [4, 8],
    "budgets": [{"J": 4, "I_d": 3}],
    "points_per_axis": 33,
    "max_width": 64,
}


def cmd_approx_demo(args) -> int:
    from .approx import ApproxBudget, assemble_sequence_approximator, make_targets, sup_error_on_grid

    cfg = dict(DEFAULT_APPROX_CONFIG)
    if args.config:
        cfg.update(load_config(args.config))
    try:
        targets = make_targets(cfg["target"], int(cfg["N"]), int(cfg["d_x"]))
        budgets = [ApproxBudget(int(b["J"]), int(b["I_d"])) for b in cfg["budgets"]]
        resolutions = [int(r) for r in cfg["resolutions"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise BadInput(f"bad approx-demo config: {exc}") from exc
    rows = []
    for budget in budgets:
        for res in resolutions:
            net = assemble_sequence_approximator(targets, budget, res, max_width=int(cfg["max_width"]))
            for tgt in targets:
                err = sup_error_on_grid(net, tgt, int(cfg["points_per_axis"]))
                rows.append([tgt.t, res, budget.J, budget.I_d, repr(err), net.width, net.depth])
                print(f"t={tgt.t} resolution={res} J={budget.J} I_d={budget.I_d} sup_error={err:.3e} W={net.width} L={net.depth}")
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "resolution", "J", "I_d", "measured_sup_error", "width", "depth"])
        w.writerows(rows)
    RunManifest("approx-demo", cfg, None, outputs=[str(out)]).write(_manifest_path(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def cmd_bounds(args) -> int:
    from .regression.theory import ScheduleRangeError, covering_bound, theory_schedule

    try:
        cov = covering_bound(args.W, args.L, args.K, args.n, args.delta)
        sched = theory_schedule(int(args.n), args.alpha, args.beta, args.d_x, args.len, args.case, args.r,
                                args.width_scale, args.depth_scale)
    except ScheduleRangeError as exc:
        raise BadInput(str(exc)) from exc
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    rows = [
        ("covering_bound", f"{cov:.6g}"),
        ("schedule_W", sched.W),
        ("schedule_L", sched.L),
        ("alpha_max", f"{sched.alpha_max:.6g}"),
        ("rate_exponent", f"{sched.rate_exponent:.6g}"),
    ]
    for k, v in rows:
        print(f"{k:<16}{v}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# regress
# ---------------------------------------------------------------------------

DEFAULT_REGRESS_CONFIG = {
    "task": {"target": "mean-sinusoid", "N": 2, "sigma": 0.1, "beta": 1.0, "K": 1.0},
    "mixing": {"kind": "exponential_mixing", "rho": 0.8, "d_x": 1},
    "ns": [256, 512, 1024, 2048],
    "replications": 5,
    "schedule": {"alpha": None, "case": None, "r": 1.0, "width_scale": 0.25, "depth_scale": 0.25},
    "train": {"optimizer": "lbfgs", "epochs": 500, "restarts": 4},
    "mc_size": 20000,
    "seed": 0,
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def _regression_target(name: str, K: float):
    from .regression.experiment import mean_sinusoid

    if name == "mean-sinusoid":
        return mean_sinusoid(K)
    if name.startswith("constant"):
        value = float(name.partition(":")[2] or 0.4)
        return lambda w: np.full(np.asarray(w).shape[0], value)
    if name == "last-token":
        return lambda w: np.asarray(w)[:, :, -1].mean(axis=1)
    raise BadInput(f"unknown regression target {name!r}")


def cmd_regress(args) -> int:
    from .regression import MixingConfig, RegressionTask, TrainConfig, TrainingDivergedError
    from .regression.experiment import run_grid, summarize

    cfg = _merge(DEFAULT_REGRESS_CONFIG, load_config(args.config))
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        t = cfg["task"]
        task = RegressionTask(_regression_target(t["target"], float(t["K"])), int(t["N"]), float(t["sigma"]),
                              float(t["beta"]), float(t["K"]))
        mixing = MixingConfig(cfg["mixing"]["kind"], float(cfg["mixing"]["rho"]), int(cfg["mixing"]["d_x"]), int(cfg["seed"]))
        train = TrainConfig(**cfg["train"])
        sched = cfg["schedule"]
        ns = [int(n) for n in cfg["ns"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise BadInput(f"bad regress config: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        runs, rate = run_grid(task, mixing, ns, int(cfg["replications"]), train, sched.get("alpha"), sched.get("case"),
                              float(sched.get("r", 1.0)), float(sched.get("width_scale", 1.0)),
                              float(sched.get("depth_scale", 1.0)), int(cfg["mc_size"]), int(cfg["seed"]))
    except TrainingDivergedError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        for entry in exc.restart_log:
            print(f"  {json.dumps(entry, sort_keys=True)}", file=sys.stderr)
        return EXIT_TRAINING
    result = summarize(runs, ns, rate)
    with (out / "results.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "replication", "excess_risk", "W", "L", "wall_seconds"])
        for r in runs:
            w.writerow([r.n, r.replication, repr(r.excess_risk), r.W, r.L, "" if args.no_timing else f"{r.wall_seconds:.3f}"])
    summary = {
        "slope": result.slope,
        "theoretical_exponent": result.theoretical_exponent,
        "per_n": [{"n": n, "mean_excess_risk": m, "std": s} for n, m, s in result.rows],
        "degenerate": result.degenerate,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    RunManifest("regress", cfg, int(cfg["seed"]),
                outputs=[str(out / "results.csv"), str(out / "summary.json")]).write(out / "manifest.json")
    for n, m, s in result.rows:
        print(f"n={n} mean_excess_risk={m:.4g} std={s:.3g}")
    print(f"slope={result.slope:.3f} theoretical={result.theoretical_exponent:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rnn-surgery", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="convert a network between FNN, RNN and MRNN forms")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--direction", choices=["fnn2rnn", "rnn2fnn", "mrnn2rnn"], required=True)
    c.add_argument("--t0", type=int, required=True)
    c.add_argument("--len", type=int, help="sequence length N (defaults to the file's dims.N, else t0)")
    c.set_defaults(func=cmd_convert)

    v = sub.add_parser("verify", help="compare two networks at step t0 on random sequences")
    v.add_argument("a")
    v.add_argument("b")
    v.add_argument("--t0", type=int, required=True)
    v.add_argument("--len", type=int)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--threshold", type=float, default=1e-8)
    v.add_argument("--domain", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    v.add_argument("--out", help="optional JSON report path")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("approx-demo", help="assemble a sequence approximator and measure its errors")
    a.add_argument("--config")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_approx_demo)

    b = sub.add_parser("bounds", help="covering bound and width/depth schedule")
    b.add_argument("--W", type=float, default=2)
    b.add_argument("--L", type=float, default=2)
    b.add_argument("--K", type=float, default=1)
    b.add_argument("--n", type=float, default=10)
    b.add_argument("--delta", type=float, default=0.1)
    b.add_argument("--alpha", type=float, default=0.0)
    b.add_argument("--beta", type=float, default=1.0)
    b.add_argument("--d-x", dest="d_x", type=int, default=1)
    b.add_argument("--len", type=int, default=2)
    b.add_argument("--case", choices=["exp_mixing", "alg_mixing", "iid"], default="exp_mixing")
    b.add_argument("--r", type=float, default=1.0)
    b.add_argument("--width-scale", type=float, default=1.0)
    b.add_argument("--depth-scale", type=float, default=1.0)
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("regress", help="sliding-window ERM over a grid of sample sizes")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--no-timing", action="store_true", help="leave wall_seconds blank so reruns are byte-identical")
    r.set_defaults(func=cmd_regress)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except DimensionError as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
