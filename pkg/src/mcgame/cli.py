"""Command-line front end.

Every subcommand writes one report, CSV (default) or JSON, to ``--out``
or stdout.  CSV reports begin with ``#`` comment lines carrying the run
manifest, followed by a fixed header row; JSON reports follow
``schemas/report.schema.json``.

Exit codes: 0 success, 1 usage or configuration error, 2 infeasible model.
"""

import argparse
import csv
import datetime
import io
import json
import math
import sys
from importlib import resources

import numpy as np

from . import __version__
from .equilibrium import analytic_pmf_2x2, binomial_limit_pmf, classify_2x2, enumerate_equilibria
from .errors import EnumerationCapExceeded, InfeasibleError, NoPositiveRoot
from .game import bmp_run, total_utility
from .model import ChannelRealization, EfficiencyModel, SystemConfig, sample_channel
from .montecarlo import ExperimentKind, ExperimentSpec, run_trials, summarize, trial_rng

TOOL = "mcgame"

MC_COMMANDS = {
    "mc-prob-vs-n": ExperimentKind.PROB_VS_N,
    "mc-pmf": ExperimentKind.PMF_X1,
    "mc-stddev": ExperimentKind.STDDEV_X1,
    "mc-utility-vs-d": ExperimentKind.UTILITY_VS_D,
    "mc-compare": ExperimentKind.JOINT_VS_INDEPENDENT,
}
COMMANDS = ("gamma-star", "equilibria", "bmp", "regions", "analytic-pmf") + tuple(MC_COMMANDS)

DEFAULT_N_LIST = (4, 8, 16, 32, 64, 128)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with SystemConfig fields (and optional 'gains')")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--trials", type=int)
    common.add_argument("--receiver", choices=("mf", "de", "mmse"))
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, help="worker processes (default: $MCGAME_THREADS or 1)")
    common.add_argument("--K", type=int, dest="num_users")
    common.add_argument("--D", type=int, dest="num_carriers")
    common.add_argument("--N", type=int, dest="processing_gain")
    common.add_argument("--M", type=int, dest="packet_total_bits")
    common.add_argument("--max-power", type=float, dest="max_power")
    common.add_argument("--max-iter", type=int, dest="bmp_max_iter")
    common.add_argument("--tolerance", type=float, dest="power_tolerance")

    parser = _Parser(prog=TOOL, description="Multi-carrier CDMA power control game.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sub.add_parser("gamma-star", parents=[common], help="target SINR of the efficiency function")
    sub.add_parser("equilibria", parents=[common], help="enumerate equilibria of one channel")
    p = sub.add_parser("bmp", parents=[common], help="run BMP on one channel")
    p.add_argument("--order", type=_int_list, help="1-based user update order, e.g. 2,1")
    p = sub.add_parser("regions", parents=[common], help="2x2 equilibrium regions")
    p.add_argument("--ratio1", type=float, help="h11/h12")
    p.add_argument("--ratio2", type=float, help="h21/h22")
    p.add_argument("--grid", type=int, default=9, help="grid points per axis")
    p = sub.add_parser("analytic-pmf", parents=[common], help="closed-form 2x2 probabilities")
    p.add_argument("--N-list", type=_int_list, dest="n_list", default=DEFAULT_N_LIST)
    for name, text in (("mc-prob-vs-n", "P(m users on carrier 1) against N"),
                       ("mc-pmf", "occupancy distribution of carrier 1"),
                       ("mc-stddev", "spread of carrier-1 occupancy against N")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--N-list", type=_int_list, dest="n_list", default=DEFAULT_N_LIST)
    p = sub.add_parser("mc-utility-vs-d", parents=[common],
                       help="total utility against the number of carriers")
    p.add_argument("--D-list", type=_int_list, dest="d_list", default=(1, 2, 4, 8))
    p.add_argument("--users-per-carrier", type=int)
    p = sub.add_parser("mc-compare", parents=[common],
                       help="joint vs independent per-carrier optimisation")
    p.add_argument("--K-list", type=_int_list, dest="k_list", default=(2, 4, 6, 8, 10))
    return parser


# ---------------------------------------------------------------------------
# Config and output
# ---------------------------------------------------------------------------
def load_config(args):
    """Resolve the SystemConfig (file values, then flag overrides) and optional gains."""
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {args.config}: {exc}")
        if not isinstance(data, dict):
            raise UsageError(f"config {args.config} must be a JSON object")
    data = dict(data)
    gains = data.pop("gains", None)
    for key in ("num_users", "num_carriers", "processing_gain", "packet_total_bits",
                "max_power", "bmp_max_iter", "power_tolerance", "receiver"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.packet_total_bits is not None and "packet_info_bits" not in data:
        # --M alone means a packet with no overhead bits
        data["packet_info_bits"] = args.packet_total_bits
    if gains is not None:
        arr = np.asarray(gains, dtype=float)
        if arr.ndim != 2:
            raise UsageError("config key 'gains' must be a K x D matrix")
        data.setdefault("num_users", arr.shape[0])
        data.setdefault("num_carriers", arr.shape[1])
        if arr.shape != (data["num_users"], data["num_carriers"]):
            raise UsageError("config key 'gains' does not match num_users x num_carriers")
    try:
        config = SystemConfig.from_dict(data)
    except KeyError as exc:
        raise UsageError(f"unknown config key {exc.args[0]!r}")
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}")
    return config, gains


def _fmt(value):
    if value is None:
        return "undefined"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def manifest(args, config, spec=None):
    out = {
        "tool": TOOL,
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "config": config.to_dict(),
    }
    if spec is not None:
        out["experiment"] = {
            "kind": spec.kind.value,
            "sweep": list(spec.sweep),
            "trials": spec.trials,
            "users_per_carrier": spec.users_per_carrier,
        }
    return out


def render(args, man, columns, rows):
    if args.format == "json":
        doc = {
            "manifest": dict(man, timestamp=datetime.datetime.now(datetime.timezone.utc)
                             .isoformat(timespec="seconds")),
            "columns": list(columns),
            "rows": [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for key in ("tool", "version", "command", "seed"):
        buf.write(f"# {key}: {man[key]}\n")
    buf.write(f"# config: {json.dumps(man['config'], sort_keys=True)}\n")
    if "experiment" in man:
        buf.write(f"# experiment: {json.dumps(man['experiment'], sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([_fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def report_schema():
    return json.loads(resources.files("mcgame").joinpath("schemas/report.schema.json").read_text())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def _channel(args, config, gains):
    if gains is not None:
        return ChannelRealization.from_gains(gains, config.processing_gain,
                                             rng=trial_rng(args.seed, 0, 0))
    return sample_channel(config, trial_rng(args.seed, 0, 0),
                          full_rank=config.receiver.value == "de")


def _carriers(assignment):
    return " ".join(str(c + 1) for c in assignment.carrier_of)


def cmd_gamma_star(args, config, gains):
    model = EfficiencyModel(config.packet_total_bits)
    row = (model.exponent, model.gamma_star, model.gamma_star_db)
    return None, ("M", "gamma_star", "gamma_star_db"), [row]


def cmd_equilibria(args, config, gains):
    channel = _channel(args, config, gains)
    found = enumerate_equilibria(channel, config)
    rows = [(a.label(), _carriers(a)) for a in found]
    return None, ("assignment", "carriers"), rows


def cmd_bmp(args, config, gains):
    channel = _channel(args, config, gains)
    order = None
    if args.order is not None:
        order = [k - 1 for k in args.order]
        if sorted(order) != list(range(config.num_users)):
            raise UsageError(f"--order must be a permutation of 1..{config.num_users}")
    out = bmp_run(channel, config, order=order)
    powers = [out.final_profile[k, c] for k, c in enumerate(out.assignment.carrier_of)]
    utility = total_utility(out.final_profile, channel, config.receiver, config)
    row = (out.status.value, out.iterations_used, out.assignment.label(), _carriers(out.assignment),
           " ".join(repr(float(p)) for p in powers), float(utility))
    return None, ("status", "iterations", "assignment", "carriers", "powers", "total_utility"), [row]


def cmd_regions(args, config, gains):
    gstar, n_pg = config.gamma_star, config.processing_gain
    if args.ratio1 is not None or args.ratio2 is not None:
        if args.ratio1 is None or args.ratio2 is None or min(args.ratio1, args.ratio2) <= 0:
            raise UsageError("--ratio1 and --ratio2 must both be given and positive")
        pairs = [(args.ratio1, args.ratio2)]
    else:
        if args.grid < 1:
            raise UsageError("--grid must be >= 1")
        axis = np.logspace(-1, 1, args.grid)
        pairs = [(float(a), float(b)) for a in axis for b in axis]
    rows = []
    for r1, r2 in pairs:
        labels = sorted(classify_2x2(r1, r2, gstar, n_pg))
        rows.append((r1, r2, " ".join(labels) if labels else "none"))
    return None, ("ratio1", "ratio2", "equilibria"), rows


def cmd_analytic_pmf(args, config, gains):
    gstar = config.gamma_star
    rows = [(n,) + analytic_pmf_2x2(gstar, n).as_tuple() for n in args.n_list]
    return None, ("N", "p0", "p1", "p2", "p_no_eq"), rows


def _spec(args, config, kind, sweep):
    return ExperimentSpec(kind=kind, sweep=sweep, base=config,
                          trials=20000 if args.trials is None else args.trials,
                          seed=args.seed, users_per_carrier=getattr(args, "users_per_carrier", None))


def cmd_mc(args, config, gains):
    kind = MC_COMMANDS[args.command]
    sweep = {ExperimentKind.UTILITY_VS_D: getattr(args, "d_list", None),
             ExperimentKind.JOINT_VS_INDEPENDENT: getattr(args, "k_list", None)}.get(
        kind, getattr(args, "n_list", None))
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be >= 1")
    try:
        spec = _spec(args, config, kind, sweep)
    except ValueError as exc:
        raise UsageError(str(exc))
    report = run_trials(spec, threads=args.threads)
    summary = summarize(report)
    k = config.num_users

    if kind is ExperimentKind.PROB_VS_N:
        analytic = k == 2 and config.num_carriers == 2 and config.receiver.value == "mf"
        columns = ["N"] + [f"p{m}" for m in range(k + 1)] + ["p_no_eq", "ci_halfwidth"]
        if analytic:
            columns += ["analytic_p0", "analytic_p1", "analytic_p2", "analytic_p_no_eq"]
        rows = []
        for point in report.points:
            pmf = point.pmf
            widest = max(float(np.max(pmf.half_widths)), pmf.no_eq_half_width)
            row = [point.value] + list(pmf.frequencies) + [pmf.no_eq_frequency, widest]
            if analytic:
                row += list(analytic_pmf_2x2(config.gamma_star, point.value).as_tuple())
            rows.append(row)
    elif kind is ExperimentKind.PMF_X1:
        columns = ["N", "m", "frequency", "ci_halfwidth", "binomial_limit", "p_no_eq"]
        rows = []
        for point in report.points:
            pmf = point.pmf
            for m, (f, hw) in enumerate(zip(pmf.frequencies, pmf.half_widths)):
                rows.append([point.value, m, f, hw, binomial_limit_pmf(k, m), pmf.no_eq_frequency])
    elif kind is ExperimentKind.STDDEV_X1:
        columns = ["N", "std_x1", "mean_x1", "converged_fraction"]
        rows = [[s.value, s.std_x1, s.mean_x1, s.converged_fraction] for s in summary]
    elif kind is ExperimentKind.UTILITY_VS_D:
        columns = ["D", "N", "K", "mean_total_utility", "utility_se", "p_no_eq", "mean_iterations"]
        rows = [[p.value, p.config.processing_gain, p.config.num_users, p.utility_mean,
                 p.utility_se, p.pmf.no_eq_frequency, p.mean_iterations] for p in report.points]
    else:
        columns = ["K", "joint_mean", "joint_se", "independent_mean", "independent_se",
                   "ratio", "independent_infeasible"]
        rows = [[p.value, p.utility_mean, p.utility_se, p.benchmark_mean, p.benchmark_se,
                 s.utility_ratio, p.benchmark_infeasible]
                for p, s in zip(report.points, summary)]
    return spec, columns, rows


HANDLERS = {
    "gamma-star": cmd_gamma_star,
    "equilibria": cmd_equilibria,
    "bmp": cmd_bmp,
    "regions": cmd_regions,
    "analytic-pmf": cmd_analytic_pmf,
}


def dispatch(argv):
    """Run one subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        config, gains = load_config(args)
        handler = HANDLERS.get(args.command, cmd_mc)
        spec, columns, rows = handler(args, config, gains)
        text = render(args, manifest(args, config, spec), columns, rows)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InfeasibleError, NoPositiveRoot, EnumerationCapExceeded) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
