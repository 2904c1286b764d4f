"""``rankcdf`` command line: combine, validate, audit, bench.

Exit codes: 0 success, 1 an asserted check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .aggregation import MODES, combine
from .bench import DEFAULT_SIZES, run_bench
from .core import ALGORITHMS
from .errors import ValidationError
from .formats import DELIMITERS, file_digest, ranking_report, read_ranked_list, sim_report, write_report
from .nullsim import NullSimConfig, audit_equivalence, run_experiment

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

MIN_RATIO_MAX_D = 0.01
EXACT_REL_TOL = 1e-9
REFERENCE_REL_TOL = 1e-12
LINEAR_AGREE_TOL = 1e-12
WITNESS_MIN_DEVIATION = 0.02


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankcdf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-o", "--output", default="-", help="output JSON path (default: stdout)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("combine", help="merge ranked list files")
    p.add_argument("inputs", nargs="+", help="ranked list files (TSV by default)")
    p.add_argument("--mode", choices=MODES, default="proposed")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="quadratic")
    p.add_argument("--delimiter", choices=sorted(DELIMITERS), default="tab")
    p.add_argument("--strict-padding", action="store_true",
                   help="put padded elements at their single average rank instead of spreading them")
    common(p)

    p = sub.add_parser("validate", help="null-hypothesis Monte Carlo suites")
    p.add_argument("--lists", type=int, default=5, help="lists per trial (stuart-q, theorem2)")
    p.add_argument("--universe-size", type=int, default=20)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--min-ratio-trials", type=int, default=100_000)
    p.add_argument("--min-ratio-lists", type=_int_list, default=[2, 5])
    p.add_argument("--proposed-lists", type=_int_list, default=[3, 10, 30])
    p.add_argument("--workers", type=int, default=1)
    common(p)

    p = sub.add_parser("audit", help="cross-check the joint CDF algorithms")
    p.add_argument("--dims", type=_int_list, default=list(range(1, 9)))
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--algorithms", type=_str_list, default=None,
                   help="force these algorithms at every dimension (default: all applicable)")
    common(p)

    p = sub.add_parser("bench", help="time the algorithms and fit log-log slopes")
    p.add_argument("--linear-sizes", type=_int_list, default=list(DEFAULT_SIZES["linear-paper"]))
    p.add_argument("--quadratic-sizes", type=_int_list, default=list(DEFAULT_SIZES["quadratic"]))
    p.add_argument("--factorial-sizes", type=_int_list, default=list(DEFAULT_SIZES["factorial"]))
    p.add_argument("--repeats", type=int, default=5)
    common(p)
    return parser


def _resolved(args) -> dict:
    # The destination is not a parameter of the result; leaving it out keeps
    # reports written to different paths byte-identical.
    return {k: v for k, v in sorted(vars(args).items()) if k != "output"}


def _provenance(args, **extra) -> dict:
    return {"seed": args.seed, "tool_version": __version__, **extra}


def cmd_combine(args) -> int:
    delim = DELIMITERS[args.delimiter]
    if args.algorithm == "linear-paper":
        print("rankcdf: warning: linear-paper is experimental and disagrees with the "
              "exact joint CDF for more than 2 thresholds", file=sys.stderr)
    lists = [read_ranked_list(path, delimiter=delim) for path in args.inputs]
    ranking = combine(lists, mode=args.mode, algorithm=args.algorithm, strict_padding=args.strict_padding)
    digests = [{"path": path, "digest": file_digest(path)} for path in args.inputs]
    report = ranking_report(ranking, _resolved(args), _provenance(args, input_digests=digests))
    write_report(report, args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    N, seed, workers = args.universe_size, args.seed, args.workers
    sections: dict = {}
    checks: dict = {}

    sections["min_ratio"] = []
    for L in args.min_ratio_lists:
        rep = run_experiment(NullSimConfig(L, N, args.min_ratio_trials, seed, "min-ratio"), workers)
        ok = rep.statistics["ks_statistic"] <= MIN_RATIO_MAX_D
        checks[f"min_ratio_L{L}_ks_le_{MIN_RATIO_MAX_D}"] = ok
        sections["min_ratio"].append(rep.to_dict())

    rep = run_experiment(NullSimConfig(args.lists, N, args.trials, seed, "stuart-q"), workers)
    checks["stuart_q_rejects_uniformity"] = rep.statistics["rejects_uniformity"]
    sections["stuart_q"] = rep.to_dict()

    sections["proposed_p"] = [
        run_experiment(NullSimConfig(L, N, args.trials, seed, "proposed-p"), workers).to_dict()
        for L in args.proposed_lists
    ]
    if args.lists >= 2:
        sections["theorem2"] = run_experiment(
            NullSimConfig(args.lists, N, args.trials, seed, "theorem2"), workers
        ).to_dict()

    passed = all(checks.values())
    statistics = {**sections, "checks": checks, "passed": passed}
    config = _resolved(args)
    # Worker count never influences results, so it stays out of the report.
    config.pop("workers")
    write_report(sim_report("validate", statistics, config, _provenance(args)), args.output)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def audit_checks(statistics: dict) -> dict:
    checks = {}
    exact_worst = 0.0
    ref_worst = 0.0
    linear_worst = None
    for entry in statistics["dims"]:
        pairs = entry["pairs"]
        if "factorial~quadratic" in pairs:
            exact_worst = max(exact_worst, pairs["factorial~quadratic"]["max_rel"])
        for key in ("factorial~reference", "quadratic~reference"):
            if key in pairs:
                ref_worst = max(ref_worst, pairs[key]["max_rel"])
        if entry["n"] <= 2 and "linear-paper~quadratic" in pairs:
            dev = pairs["linear-paper~quadratic"]["max_rel"]
            linear_worst = dev if linear_worst is None else max(linear_worst, dev)
    checks["factorial_matches_quadratic"] = {"max_rel": exact_worst, "tolerance": EXACT_REL_TOL,
                                             "passed": exact_worst <= EXACT_REL_TOL}
    checks["exact_match_reference"] = {"max_rel": ref_worst, "tolerance": REFERENCE_REL_TOL,
                                       "passed": ref_worst <= REFERENCE_REL_TOL}
    dev = statistics["witness"]["linear_deviation"]
    checks["witness_deviation_detected"] = {"deviation": dev, "minimum": WITNESS_MIN_DEVIATION,
                                            "passed": dev >= WITNESS_MIN_DEVIATION}
    if linear_worst is not None:
        checks["linear_matches_quadratic_n_le_2"] = {"max_rel": linear_worst, "tolerance": LINEAR_AGREE_TOL,
                                                     "passed": linear_worst <= LINEAR_AGREE_TOL}
    return checks


def cmd_audit(args) -> int:
    rep = audit_equivalence(args.dims, args.samples, args.seed, args.algorithms)
    checks = audit_checks(rep.statistics)
    passed = all(c["passed"] for c in checks.values())
    statistics = {**rep.statistics, "checks": checks, "passed": passed}
    write_report(sim_report("audit", statistics, _resolved(args), _provenance(args)), args.output)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_bench(args) -> int:
    sizes = {
        "linear-paper": args.linear_sizes,
        "quadratic": args.quadratic_sizes,
        "factorial": args.factorial_sizes,
    }
    for n in args.factorial_sizes:
        if n > 16:
            raise ValidationError(f"factorial benchmark sizes must be <= 16, got {n}")
    if min(min(v) for v in sizes.values()) < 1 or args.repeats < 1:
        raise ValidationError("sizes and repeats must be positive")
    statistics = run_bench(sizes, repeats=args.repeats, seed=args.seed)
    write_report(sim_report("bench", statistics, _resolved(args), _provenance(args)), args.output)
    return EXIT_OK


COMMANDS = {"combine": cmd_combine, "validate": cmd_validate, "audit": cmd_audit, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"rankcdf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
