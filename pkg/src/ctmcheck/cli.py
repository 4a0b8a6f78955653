"""Command line frontend.

Single run::

    ctmcheck --model tandem.sm --property 'P=? [ true U<=0.25 "full" ]'

Corpus run (paired .sm/.csl files in a directory)::

    ctmcheck corpus run corpus/ --format csv --out results/

Exit codes: 0 the property holds or the bound converged, 1 it fails,
2 inconclusive, 3 usage/parse/model error, 4 a resource cap was hit.
"""

import argparse
import sys
from pathlib import Path

from . import csl, explorer, oracle, report
from .checker import RefineParams, Verdict, refine
from .errors import CtmcheckError, ParseError, ResourceCapError
from .model import parse_model

EXIT_OK = 0
EXIT_FAILS = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 3
EXIT_RESOURCE = 4

_VERDICT_EXIT = {
    Verdict.HOLDS: EXIT_OK,
    Verdict.EXACT_WITHIN_EPSILON: EXIT_OK,
    Verdict.FAILS: EXIT_FAILS,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_param_flags(parser):
    parser.add_argument("--kappa", type=float, default=1e-3,
                        help="initial truncation threshold (default 1e-3)")
    parser.add_argument("--rfactor", type=float, default=1000.0,
                        help="threshold reduction factor per iteration "
                             "(default 1000)")
    parser.add_argument("--epsilon", type=float, default=1e-3,
                        help="bound width considered converged (default 1e-3)")
    parser.add_argument("--max-iters", type=int, default=10,
                        help="iteration cap (default 10)")
    parser.add_argument("--state-cap", type=int,
                        default=explorer.DEFAULT_STATE_CAP,
                        help="abort exploration past this many states")
    parser.add_argument("--tol", type=float, default=1e-10,
                        help="transient analysis tolerance (default 1e-10)")
    parser.add_argument("--agnostic", action="store_true",
                        help="force property-agnostic expansion in every "
                             "iteration")
    parser.add_argument("--format", choices=("json", "csv", "text"),
                        default=None, help="output format")


def _params_from_args(args):
    if not 0.0 < args.kappa <= 1.0:
        raise _UsageError("kappa must be in (0,1]")
    if args.rfactor <= 1.0:
        raise _UsageError("rfactor must be greater than 1")
    if args.epsilon <= 0.0:
        raise _UsageError("epsilon must be positive")
    if args.max_iters < 1:
        raise _UsageError("max-iters must be at least 1")
    return RefineParams(kappa0=args.kappa, reduction_factor=args.rfactor,
                        epsilon=args.epsilon, max_iterations=args.max_iters,
                        state_cap=args.state_cap, transient_tol=args.tol,
                        force_agnostic=args.agnostic)


def _read_file(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise _UsageError(f"cannot read {what} '{path}': {err.strerror}")


def _load_properties(spec_text, model):
    """--property takes inline text or @path to a .csl file."""
    if spec_text.startswith("@"):
        content = _read_file(spec_text[1:], "property file")
        return csl.parse_property_file(content, model)
    return [(spec_text.strip(), csl.parse_property(spec_text, model))]


def _oracle_payload(model, query, run, cap):
    if csl.classify(query) is csl.UntilClass.NESTED_UNTIL:
        return {"error": "oracle cross-check supports non-nested "
                         "properties only"}
    try:
        full = oracle.enumerate_full(model, cap)
        path = query.path
        phi_fn, _ = csl.compile_state_formula(model, path.left)
        psi_fn, _ = csl.compile_state_formula(model, path.right)
        exact = oracle.exact_until(full, lambda v: phi_fn(v, ()),
                                   lambda v: psi_fn(v, ()),
                                   path.time_bound)
    except ResourceCapError as err:
        return {"error": str(err)}
    bound = run.final_bound
    return {
        "exact": report.round_sig(exact),
        "states": full.size,
        "within_bounds": bool(bound.pmin - 1e-9 <= exact <= bound.pmax + 1e-9),
    }


def run(args):
    """Single verification run; returns the process exit code."""
    model_text = _read_file(args.model, "model file")
    model = parse_model(model_text)
    properties = _load_properties(args.property, model)
    if len(properties) != 1:
        raise _UsageError(f"expected exactly one property, found "
                          f"{len(properties)}; use 'corpus run' for batches")
    prop_text, query = properties[0]
    params = _params_from_args(args)
    result = refine(model, query, params)
    payload = report.run_to_dict(args.model, prop_text, params, result)
    if args.oracle:
        payload["oracle"] = _oracle_payload(model, query, result,
                                            args.oracle_cap)
    fmt = args.format or "text"
    if fmt == "json":
        sys.stdout.write(report.to_json(payload))
    elif fmt == "csv":
        sys.stdout.write(report.to_csv(report.csv_rows(payload)))
    else:
        sys.stdout.write(report.to_text(payload))
    if args.export_states:
        explorer.export_states(result.graph, args.export_states)
    if args.plot:
        report.render_refinement_figure(payload, args.plot)
    return _VERDICT_EXIT[result.verdict]


def run_corpus(directory, args):
    """Verify every paired .sm/.csl file under `directory`; one failure
    does not stop the rest. Returns the process exit code."""
    root = Path(directory)
    if not root.is_dir():
        raise _UsageError(f"corpus directory '{directory}' does not exist")
    params = _params_from_args(args)
    runs = []
    errors = []
    for sm_path in sorted(root.glob("*.sm")):
        csl_path = sm_path.with_suffix(".csl")
        rel = str(sm_path)
        if not csl_path.exists():
            errors.append({"model": rel,
                           "error": f"missing property file {csl_path.name}"})
            continue
        try:
            model = parse_model(sm_path.read_text(encoding="utf-8"))
            properties = csl.parse_property_file(
                csl_path.read_text(encoding="utf-8"), model)
        except (CtmcheckError, OSError) as err:
            errors.append({"model": rel, "error": str(err)})
            continue
        for prop_text, query in properties:
            try:
                result = refine(model, query, params)
            except CtmcheckError as err:
                errors.append({"model": rel, "property": prop_text,
                               "error": str(err)})
                continue
            runs.append(report.run_to_dict(rel, prop_text, params, result))

    fmt = args.format or "csv"
    if fmt == "json":
        output = report.corpus_to_json(runs, errors)
    elif fmt == "text":
        output = report.corpus_to_text(runs, errors)
    else:
        output = report.corpus_to_csv(runs, errors)
    sys.stdout.write(output)

    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        suffix = {"json": ".json", "text": ".txt", "csv": ".csv"}[fmt]
        (outdir / f"results{suffix}").write_text(output, encoding="utf-8")
        by_model = {}
        for payload in runs:
            stem = Path(payload["model"]).stem
            k = by_model.setdefault(stem, 0)
            by_model[stem] = k + 1
            fig_path = outdir / f"{stem}__p{k}.png"
            report.render_refinement_figure(payload, fig_path)
    return EXIT_OK


def _build_check_parser():
    parser = _Parser(prog="ctmcheck", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--model", required=True, help="model file (.sm)")
    parser.add_argument("--property", required=True,
                        help="property text, or @path to a .csl file")
    _add_param_flags(parser)
    parser.add_argument("--export-states", metavar="PATH",
                        help="write explored states here (transitions go to "
                             "a sibling .tra file)")
    parser.add_argument("--oracle", action="store_true",
                        help="cross-check against full enumeration")
    parser.add_argument("--oracle-cap", type=int, default=oracle.DEFAULT_CAP,
                        help="state cap for the oracle cross-check")
    parser.add_argument("--plot", metavar="PATH",
                        help="render the bound-convergence figure here")
    return parser


def _build_corpus_parser():
    parser = _Parser(prog="ctmcheck corpus run")
    parser.add_argument("directory")
    _add_param_flags(parser)
    parser.add_argument("--out", metavar="DIR",
                        help="also write the report and one figure per run "
                             "into this directory")
    return parser


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        if argv and argv[0] == "corpus":
            rest = argv[1:]
            if not rest or rest[0] != "run":
                raise _UsageError("usage: ctmcheck corpus run DIR [flags]")
            args = _build_corpus_parser().parse_args(rest[1:])
            return run_corpus(args.directory, args)
        args = _build_check_parser().parse_args(argv)
        return run(args)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except CtmcheckError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
