"""``qoptbench`` command line: run, compare, list-problems, trace."""
import argparse
import json
import sys

import numpy as np

from ..errors import ConfigError, QoptError
from ..problems import PROBLEM_TABLE
from .config import BenchConfig, InitialControls, load_config
from .harness import (compare, emit_trace, render_table, run_benchmark, run_restart,
                      write_trace_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _problem_arg(text):
    try:
        return int(text)
    except ValueError:
        return text


def _bounds_arg(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo,hi") from None
    return lo, hi


def _add_run_options(p, multi_scheme=False):
    p.add_argument("--config", action="append" if multi_scheme else "store",
                   help="TOML configuration file; command-line flags override it")
    p.add_argument("--problem", type=_problem_arg, help="problem id (1-23) or custom TOML path")
    if multi_scheme:
        p.add_argument("--scheme", action="append", help="repeat to compare several schemes")
    else:
        p.add_argument("--scheme", help="krotov, grape-bfgs, grape-lbfgs, hybrid(n,s,method), "
                                        "handover(thr,s1,s2)")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--std", type=float, help="standard deviation of the initial amplitudes")
    p.add_argument("--mean", type=float)
    p.add_argument("--constrained", type=_bounds_arg, metavar="LO,HI")
    p.add_argument("--handover", type=float, metavar="THRESHOLD",
                   help="start with krotov and switch to --scheme at this fidelity")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--f-target", type=float)
    p.add_argument("--wall-clock-cap", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory (or CSV path for `trace`)")


def build_parser():
    parser = argparse.ArgumentParser(prog="qoptbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_options(sub.add_parser("run", help="multi-restart benchmark"))
    _add_run_options(sub.add_parser("compare", help="several schemes side by side"), True)
    sub.add_parser("list-problems", help="list the built-in problems")
    tr = sub.add_parser("trace", help="single run, convergence trace as CSV")
    _add_run_options(tr)
    tr.add_argument("--restart", type=int, default=0)
    return parser


def _merge(args, base, scheme=None):
    """Combine a config file (if any) with command-line overrides."""
    fields = {}
    if base is not None:
        fields = dict(problem=base.problem, scheme=base.scheme, restarts=base.restarts,
                      seed=base.seed, jobs=base.jobs, u_init=base.u_init, stop=dict(base.stop),
                      constrained=base.constrained)
    else:
        fields["stop"] = {}
    for name in ("problem", "restarts", "seed", "jobs", "constrained"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    scheme = scheme if scheme is not None else args.scheme
    if scheme is not None:
        fields["scheme"] = scheme
    if args.handover is not None:
        fields["scheme"] = f"handover({args.handover},krotov,{fields.get('scheme') or 'grape-bfgs'})"
    init = fields.get("u_init", InitialControls())
    if args.std is not None or args.mean is not None:
        init = InitialControls(init.mean if args.mean is None else args.mean,
                               init.std if args.std is None else args.std, init.distribution)
    fields["u_init"] = init
    for flag, key in (("max_iters", "max_iters"), ("f_target", "f_target"),
                      ("wall_clock_cap", "wall_clock_cap")):
        if getattr(args, flag) is not None:
            fields["stop"][key] = getattr(args, flag)
    for name in ("problem", "scheme"):
        if fields.get(name) is None:
            raise ConfigError(f"--{name} is required (or give it in --config)")
    return BenchConfig(**fields)


def _cmd_run(args):
    config = _merge(args, load_config(args.config) if args.config else None)
    summary, _ = run_benchmark(config, args.out)
    sys.stdout.write(render_table([summary]))
    return EXIT_NUMERIC if summary.incomplete else EXIT_OK


def _cmd_compare(args):
    configs = []
    for path in args.config or []:
        configs.append(_merge(args, load_config(path)))
    for scheme in args.scheme or []:
        configs.append(_merge(args, None, scheme))
    summaries, table = compare(configs, args.out)
    sys.stdout.write(table)
    if args.out is None:
        json.dump([s.to_dict() for s in summaries], sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_NUMERIC if any(s.incomplete for s in summaries) else EXIT_OK


def _cmd_list(_args):
    for pid, (desc, dim, slices, time, target) in PROBLEM_TABLE.items():
        print(f"{pid:3d}  dim={dim:<3d} M={slices:<5d} T={time:<6g} target={target:<8s} {desc}")
    return EXIT_OK


def _cmd_trace(args):
    config = _merge(args, load_config(args.config) if args.config else None)
    record = run_restart(config, args.restart)
    if not record.ok:
        print(record.error, file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        emit_trace(record.trace, args.out)
    else:
        write_trace_csv(record.trace, sys.stdout)
    print(f"final fidelity {record.final_fidelity:.6f} ({record.stop_reason})", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "list-problems": _cmd_list,
            "trace": _cmd_trace}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QoptError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
