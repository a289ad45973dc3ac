"""Command-line front end.

Every command reads an optional JSON config (``--config``); command-line
flags override config fields. Output format follows the ``--out``
extension (``.csv`` or ``.json``); without ``--out`` JSON goes to stdout.

Exit codes: 0 success, 1 other numerical failure, 2 invalid config,
3 no discrepancy root, 4 budget exhausted, 5 I/O error, 6 truncation
insufficient.
"""

import argparse
import json
import logging
import sys
from dataclasses import astuple
from pathlib import Path

import jsonschema

from . import experiments, linop, seqlab, tikhonov
from .discrepancy import DPConfig, solve_dp
from .errors import (
    BudgetExhausted,
    DimensionMismatch,
    InvalidPlan,
    IoError,
    NoRoot,
    NotInRange,
    ParameterOutOfRange,
    RegDPError,
    TruncationInsufficient,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NO_ROOT = 3
EXIT_BUDGET = 4
EXIT_IO = 5
EXIT_TRUNCATION = 6

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_DELTAS = {"type": "array", "items": _POS, "minItems": 1}
_OPERATOR = {
    "type": "object",
    "properties": {
        "rows": _INT,
        "cols": _INT,
        "entries": {"type": "array", "items": _NUM},
    },
    "required": ["rows", "cols", "entries"],
    "additionalProperties": False,
}
_VECTOR = {
    "oneOf": [
        {"type": "array", "items": _NUM, "minItems": 1},
        {
            "type": "object",
            "properties": {"entries": {"type": "array", "items": _NUM, "minItems": 1}},
            "required": ["entries"],
            "additionalProperties": False,
        },
    ]
}
_MODEL = {
    "q": _POS,
    "r": {"type": "number", "exclusiveMinimum": 1},
    "N": _INT,
    "tail_mode": {"enum": list(seqlab.TAIL_MODES)},
}
_NOISE = {"seed": _SEED, "ratio": _POS, "max_resamples": _INT}


def _schema(properties, required=()):
    return {
        "type": "object",
        "properties": properties,
        "required": list(required),
        "additionalProperties": False,
    }


SCHEMAS = {
    "solve": _schema(
        {"operator": _OPERATOR, "f_delta": _VECTOR, "a": _POS, "tol": {"type": "number", "minimum": 0}},
        ("operator", "f_delta", "a"),
    ),
    "dp-root": _schema(
        {
            "operator": _OPERATOR,
            "f_delta": _VECTOR,
            "delta": _POS,
            "C": {"type": "number", "minimum": 1},
            "rel_tol": _POS,
            "max_iter": _INT,
            "bracket_seed": _POS,
            "tol": {"type": "number", "minimum": 0},
        },
        ("operator", "f_delta", "delta"),
    ),
    "study-linear": _schema(
        {
            "problem": {
                "oneOf": [
                    {"enum": ["reference", "rank_deficient"]},
                    _schema({"operator": _OPERATOR, "y": _VECTOR}, ("operator", "y")),
                ]
            },
            "n": _INT,
            "rank": _INT,
            "problem_seed": _SEED,
            "deltas": _DELTAS,
            "C": {"type": "number", "minimum": 1},
            "rel_tol": _POS,
            **_NOISE,
        },
        ("deltas",),
    ),
    "study-nonlinear": _schema(
        {"n": {"type": "integer", "minimum": 2}, "deltas": _DELTAS, "budget": _INT, **_NOISE},
        ("deltas",),
    ),
    "counterexample": _schema(
        {"deltas": _DELTAS, "C": {"type": "number", "minimum": 1}, "b": _POS, **_MODEL},
        ("deltas",),
    ),
    "phi-check": _schema({"a_values": _DELTAS, **_MODEL}, ("a_values",)),
}

COMMAND_HELP = {
    "solve": "Tikhonov solution for a fixed parameter a",
    "dp-root": "discrepancy-principle parameter a(delta) for a dense operator",
    "study-linear": "convergence study with discrepancy-principle regularization",
    "study-nonlinear": "convergence study of the a-priori nonlinear quasi-minimizer",
    "counterexample": "non-uniformity certificates in the power-law sequence model",
    "phi-check": "series/integral sandwich table for the power-law model",
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    parser = _Parser(
        prog="regdp",
        description="Tikhonov regularization with the discrepancy principle.",
        epilog="commands: " + "; ".join(f"{k}: {v}" for k, v in COMMAND_HELP.items()),
    )
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name, text in COMMAND_HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, help="output path ending in .csv or .json")
        if name in ("study-linear", "study-nonlinear", "counterexample"):
            p.add_argument("--deltas", type=_float_list, help="comma-separated noise levels")
        if name in ("study-linear", "study-nonlinear"):
            p.add_argument("--seed", type=int, help="noise seed")
        if name in ("dp-root", "study-linear", "counterexample"):
            p.add_argument("--C", type=float, dest="C", help="discrepancy constant C >= 1")
        if name == "dp-root":
            p.add_argument("--delta", type=float, help="noise level")
        if name == "solve":
            p.add_argument("--a", type=float, help="regularization parameter")
        if name == "counterexample":
            p.add_argument("--b", type=float, help="source exponent in (0, 1)")
        if name in ("counterexample", "phi-check"):
            p.add_argument("--N", type=int, dest="N", help="explicit summation length")
        if name == "phi-check":
            p.add_argument("--a-grid", type=_float_list, dest="a_values", help="comma-separated a values")
    return parser


def load_config(command, args):
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    for key in ("deltas", "seed", "C", "delta", "a", "b", "N", "a_values"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "config"
        raise ConfigError(f"{where}: {exc.message}") from None
    return cfg


def _output_kind(out):
    if out is None:
        return "stdout"
    suffix = out.suffix.lower()
    if suffix not in (".csv", ".json"):
        raise ConfigError(f"--out must end in .csv or .json, got {out}")
    return suffix[1:]


def _write_json(doc, out):
    text = json.dumps(doc, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {out}: {exc}") from exc


def _dp_config(cfg):
    kw = {k: cfg[k] for k in ("C", "rel_tol", "max_iter", "bracket_seed") if k in cfg}
    try:
        return DPConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _noise(cfg):
    kw = {k: cfg[k] for k in _NOISE if k in cfg}
    try:
        return experiments.NoiseSpec(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _model(cfg):
    kw = {k: cfg[k] for k in _MODEL if k in cfg}
    if "tail_mode" not in kw and (kw.get("q", 1) != 1 or kw.get("r", 2) != 2):
        kw["tail_mode"] = "drop"
    try:
        return seqlab.PowerLawModel(**kw)
    except (ValueError, ParameterOutOfRange) as exc:
        raise ConfigError(str(exc)) from exc


def _operator_and_data(cfg):
    A = linop.operator_from_json(cfg["operator"])
    f = linop.vector_from_json(cfg["f_delta"])
    return linop.decompose(A), f


def cmd_solve(cfg, out, kind):
    S, f = _operator_and_data(cfg)
    sol = tikhonov.solve(S, f, cfg["a"], cfg.get("tol"))
    if kind == "csv":
        header = {k: repr(v) for k, v in sol.to_json().items() if k != "u"}
        experiments.write_table(list(enumerate(sol.u.tolist())), ("index", "u"), out, header)
    else:
        _write_json(sol.to_json(), out)
    return EXIT_OK


def cmd_dp_root(cfg, out, kind):
    S, f = _operator_and_data(cfg)
    res = solve_dp(S, f, cfg["delta"], _dp_config(cfg), cfg.get("tol"))
    if kind == "csv":
        experiments.write_table(
            [(res.a, res.h_at_a, res.iterations, res.bracket[0], res.bracket[1])],
            ("a", "h_at_a", "iterations", "bracket_lo", "bracket_hi"),
            out,
        )
    else:
        _write_json(res.to_json(), out)
    return EXIT_OK


def _linear_problem(cfg):
    spec = cfg.get("problem", "reference")
    if spec == "reference":
        return experiments.reference_problem(cfg.get("n", 500))
    if spec == "rank_deficient":
        return experiments.rank_deficient_problem(
            cfg.get("n", 100), cfg.get("rank"), cfg.get("problem_seed", 0)
        )
    return experiments.LinearProblem(
        linop.operator_from_json(spec["operator"]), linop.vector_from_json(spec["y"])
    )


def _emit_study(rows, header, out, kind):
    if kind == "csv":
        experiments.write_report(rows, out, header)
    else:
        _write_json(
            {"header": header, "rows": [dict(zip(experiments.ROW_FIELDS, astuple(r))) for r in rows]},
            out,
        )


def cmd_study_linear(cfg, out, kind):
    plan = experiments.StudyPlan(
        _linear_problem(cfg), cfg["deltas"], _dp_config(cfg), _noise(cfg), str(out) if out else None
    )
    rows = experiments.run_linear_study(plan)
    _emit_study(rows, plan.header(), out, kind)
    return EXIT_OK


def cmd_study_nonlinear(cfg, out, kind):
    problem = experiments.reference_nonlinear_problem(cfg.get("n", 64), cfg.get("budget", 100_000))
    plan = experiments.StudyPlan(problem, cfg["deltas"], noise=_noise(cfg), output_path=str(out) if out else None)
    flagged = []
    rows = experiments.run_nonlinear_study(plan, flagged)
    header = plan.header()
    if flagged:
        header["budget_exhausted"] = ",".join(repr(d) for d in flagged)
    _emit_study(rows, header, out, kind)
    if flagged:
        print(f"regdp: budget exhausted at delta = {header['budget_exhausted']}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_counterexample(cfg, out, kind):
    model = _model(cfg)
    try:
        certs = seqlab.nonuniformity_sweep(model, cfg["deltas"], cfg.get("C", 1.0), cfg.get("b", 0.5))
    except ValueError as exc:
        if isinstance(exc, RegDPError):
            raise
        raise ConfigError(str(exc)) from exc
    if kind == "csv":
        header = {"model": f"q={model.q!r} r={model.r!r} N={model.N} tail_mode={model.tail_mode}"}
        experiments.write_table(
            [astuple(c) for c in certs], seqlab.BadPairCertificate.field_names(), out, header
        )
    else:
        _write_json([c.to_json() for c in certs], out)
    return EXIT_OK


def cmd_phi_check(cfg, out, kind):
    rows = seqlab.phi_table(_model(cfg), cfg["a_values"])
    if kind == "csv":
        cols = ("a", "phi", "psi", "a_phi", "phi_lo", "phi_hi")
        experiments.write_table([tuple(r[c] for c in cols) for r in rows], cols, out)
    else:
        _write_json(rows, out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "dp-root": cmd_dp_root,
    "study-linear": cmd_study_linear,
    "study-nonlinear": cmd_study_nonlinear,
    "counterexample": cmd_counterexample,
    "phi-check": cmd_phi_check,
}


def run(argv=None):
    """Parse ``argv``, dispatch and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.command, args)
        kind = _output_kind(args.out)
        return COMMANDS[args.command](cfg, args.out, kind)
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)
    except (ConfigError, InvalidPlan, DimensionMismatch, NotInRange, ParameterOutOfRange) as exc:
        print(f"regdp: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoRoot as exc:
        print(f"regdp: no root: {exc}", file=sys.stderr)
        return EXIT_NO_ROOT
    except BudgetExhausted as exc:
        print(f"regdp: budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except IoError as exc:
        print(f"regdp: {exc}", file=sys.stderr)
        return EXIT_IO
    except TruncationInsufficient as exc:
        print(f"regdp: truncation insufficient: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (RegDPError, ValueError) as exc:
        print(f"regdp: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main():
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
