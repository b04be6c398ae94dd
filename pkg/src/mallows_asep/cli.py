"""Command-line front end.

One table (:data:`COMMANDS`) declares every subcommand's parameters, their
types, defaults, and requiredness; the argument parser, the key=value
config-file validation, and the effective-config echo are all generated
from it, so a flag cannot drift away from its config field.

Precedence: command-line flags override config-file entries, which override
defaults.  The merged configuration is printed before anything runs.

Exit status: 0 on success, 2 when a statistical check fails, 1 on any
configuration or runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from ._rng import stream
from .batch import step_height_samples
from .experiments import (BudgetError, WindowError, calibrate,
                          diffusive_experiment, kpz_coupling_experiment,
                          kpz_lln_experiment, verify_color_preservation,
                          verify_many_point, verify_one_point)
from .hermite_dpp import (closed_form_first_moment, weighted_trace, xi_pmf)
from .mallows import height_pmf, height_pmf_multi, sample_finite
from .reports import write_csv, write_jsonl

OUT_DIR_ENV = "MALLOWS_ASEP_OUT"


class ConfigError(Exception):
    """Bad configuration: unknown key, missing value, or failed conversion."""


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v != "")


def _ints(text):
    return tuple(int(v) for v in str(text).split(",") if v != "")


def _window(text):
    lo, hi = str(text).split(":")
    return int(lo), int(hi)


# dest -> (converter, default, required, help)
_GLOBAL = {
    "out": (str, None, False, "output file (reports) or directory"),
    "format": (str, "jsonl", False, "report serialization: jsonl or csv"),
    "threads": (int, os.cpu_count() or 1, False,
                "worker count for replica simulation"),
}

COMMANDS = {
    "sample-mallows": {
        "n": (int, None, True, "permutation size"),
        "q": (float, None, True, "bias parameter in [0, 1)"),
        "count": (int, 5, False, "how many draws to print"),
        "seed": (int, 0, False, "master seed"),
    },
    "pmf": {
        "K": (int, None, True, "low-color budget"),
        "L": (int, None, True, "word length"),
        "q": (float, None, True, "bias parameter"),
    },
    "pmf-multi": {
        "K": (int, None, True, "low-color budget"),
        "lengths": (_ints, None, True,
                    "comma-separated nondecreasing word lengths"),
        "q": (float, None, True, "bias parameter"),
    },
    "simulate": {
        "t": (float, None, True, "time horizon"),
        "q": (float, None, True, "swap bias"),
        "xs": (_floats, (0.0,), False, "comma-separated readout locations"),
        "reps": (int, 1, False, "replica count"),
        "seed": (int, 0, False, "master seed"),
        "window": (_window, None, False, "site window lo:hi (default: auto)"),
        "tol": (float, 1e-8, False, "truncation tail tolerance"),
    },
    "verify one-point": {
        "K": (int, None, True, "low-color budget"),
        "q": (float, None, True, "swap bias"),
        "t": (float, None, True, "time horizon"),
        "x": (float, None, True, "readout location"),
        "reps": (int, 100_000, False, "replica count per side"),
        "seed": (int, 0, False, "master seed"),
        "tol": (float, 1e-8, False, "truncation tail tolerance"),
        "tv-threshold": (float, 0.01, False, "TV distance bound"),
        "alpha": (float, 1e-3, False, "two-sample significance"),
    },
    "verify many-point": {
        "K": (int, None, True, "low-color budget"),
        "q": (float, None, True, "swap bias"),
        "t": (float, None, True, "time horizon"),
        "xs": (_floats, None, True,
               "comma-separated nonincreasing readout locations"),
        "reps": (int, 100_000, False, "replica count per side"),
        "seed": (int, 0, False, "master seed"),
        "tol": (float, 1e-8, False, "truncation tail tolerance"),
        "tv-threshold": (float, 0.02, False, "joint TV distance bound"),
        "alpha": (float, 1e-3, False, "two-sample significance"),
    },
    "verify coloring": {
        "K": (int, None, True, "low-color budget"),
        "L": (int, None, True, "word length"),
        "q": (float, None, True, "swap bias"),
        "t": (float, None, True, "time horizon"),
        "reps": (int, 100_000, False, "replica count"),
        "seed": (int, 0, False, "master seed"),
        "tol": (float, 1e-8, False, "truncation tail tolerance"),
        "alpha": (float, 1e-3, False, "test significance"),
    },
    "verify diffusive": {
        "K": (int, None, True, "tagged particle count"),
        "q": (float, None, True, "swap bias"),
        "t": (float, None, True, "time horizon"),
        "rs": (_floats, (0.0,), False, "comma-separated scaled offsets"),
        "reps": (int, 100_000, False, "replica count per side"),
        "seed": (int, 0, False, "master seed"),
        "tol": (float, 1e-8, False, "truncation tail tolerance"),
        "tv-threshold": (float, 0.05, False, "TV bound per offset"),
    },
    "verify kpz-lln": {
        "eps": (_floats, None, True, "comma-separated decreasing epsilons"),
        "c": (float, None, True, "low-count slot offset"),
        "d": (float, None, True, "length slot offset"),
        "reps": (int, 2000, False, "draws per epsilon"),
        "seed": (int, 0, False, "master seed"),
    },
    "verify kpz-coupling": {
        "eps": (float, None, True, "scaling parameter in (0, 1)"),
        "c": (float, None, True, "low-count slot offset"),
        "hat-t": (float, None, True, "scaled time"),
        "reps": (int, 1000, False, "replica count"),
        "seed": (int, 0, False, "master seed"),
        "tol": (float, 1e-8, False, "truncation tail tolerance"),
    },
    "hermite-check": {
        "r": (float, None, True, "half-line cutoff"),
        "q": (float, None, True, "weight base"),
    },
    "xi-pmf": {
        "r": (float, None, True, "half-line cutoff"),
        "q": (float, None, True, "weight base"),
        "L-max": (int, 40, False, "largest recovered value"),
    },
    "calibrate": {
        "runs": (int, 200, False, "null resamples per test"),
        "draws": (int, 2000, False, "sample size per resample"),
        "seed": (int, 0, False, "master seed"),
    },
}


class _Parser(argparse.ArgumentParser):
    # the contract reserves exit status 2 for statistical failures, so
    # argument errors leave through 1 like every other bad configuration
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dest(key: str) -> str:
    return key.replace("-", "_")


def _add_params(parser, table):
    for key, (conv, default, _required, help_text) in table.items():
        parser.add_argument(f"--{key}", dest=_dest(key), type=conv,
                            default=None, help=help_text)


def _add_globals(parser, *, on_subcommand: bool):
    # SUPPRESS keeps a subparser from clobbering a value the top-level
    # parse already set, so the flags work on either side of the command
    default = argparse.SUPPRESS if on_subcommand else None
    parser.add_argument("--config", default=default,
                        help="key=value config file")
    for key, (conv, _default, _req, help_text) in _GLOBAL.items():
        extra = {"choices": ("jsonl", "csv")} if key == "format" else {}
        parser.add_argument(f"--{key}", dest=_dest(key), type=conv,
                            default=default, help=help_text, **extra)


def build_parser() -> _Parser:
    parser = _Parser(prog="mallows-asep",
                     description="Samplers, exact laws, and verification "
                                 "experiments for biased sorting dynamics.")
    _add_globals(parser, on_subcommand=False)
    sub = parser.add_subparsers(dest="command")
    verify = None
    for name, table in COMMANDS.items():
        if name.startswith("verify "):
            if verify is None:
                verify = sub.add_parser("verify").add_subparsers(
                    dest="variant")
            p = verify.add_parser(name.split(" ", 1)[1])
        else:
            p = sub.add_parser(name)
        _add_params(p, table)
        _add_globals(p, on_subcommand=True)
    return parser


def read_config_file(path: str) -> dict:
    """Parse `key = value` lines; blank lines and # comments are skipped."""
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, "
                                  f"got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
    return entries


def _merge_config(command: str, file_entries: dict, cli_ns) -> dict:
    table = dict(_GLOBAL)
    table.update(COMMANDS[command])
    known = {_dest(k): (k, conv) for k, (conv, *_rest) in table.items()}

    cfg = {_dest(k): default for k, (_c, default, *_r) in table.items()}
    for raw_key, raw_value in file_entries.items():
        dest = _dest(raw_key)
        if dest == "experiment":
            continue
        if dest not in known:
            raise ConfigError(
                f"unknown config field {raw_key!r} for {command!r}; "
                f"valid: {', '.join(sorted(k for k, _ in known.values()))}")
        key, conv = known[dest]
        try:
            cfg[dest] = conv(raw_value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config field {raw_key!r}: {exc}") from exc
    for dest in known:
        value = getattr(cli_ns, dest, None)
        if value is not None:
            cfg[dest] = value
    for key, (conv, default, required, _h) in table.items():
        if required and cfg[_dest(key)] is None:
            raise ConfigError(f"{command}: missing required field {key!r}")
    return cfg


def _echo(command: str, cfg: dict) -> None:
    print("# effective config")
    print(f"experiment = {command}")
    for dest in sorted(cfg):
        value = cfg[dest]
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        print(f"{dest} = {value}")


def _report_path(command: str, cfg: dict) -> str:
    ext = "csv" if cfg["format"] == "csv" else "jsonl"
    out = cfg["out"]
    if out and not os.path.isdir(out):
        return out
    base = out or os.environ.get(OUT_DIR_ENV) or "."
    return os.path.join(base, f"{command.replace(' ', '-')}.{ext}")


def _emit_report(command: str, cfg: dict, report) -> int:
    path = _report_path(command, cfg)
    if cfg["format"] == "csv":
        write_csv([report], path)
    else:
        write_jsonl([report], path)
    for line in report.summary_lines():
        print(line)
    print(f"report: {path}")
    return 0 if report.passed else 2


# ---------------------------------------------------------------------------
# subcommand bodies


def _run_sample_mallows(cfg):
    rng = stream(cfg["seed"], 0, 0)
    for _ in range(cfg["count"]):
        print(" ".join(str(v) for v in sample_finite(cfg["n"], cfg["q"], rng)))
    return 0


def _run_pmf(cfg):
    # exact rational evaluation, one rounding at output
    probs = height_pmf(cfg["K"], cfg["L"], Fraction(cfg["q"])).as_dict()
    print({s: float(p) for s, p in probs.items()})
    return 0


def _run_pmf_multi(cfg):
    probs = height_pmf_multi(cfg["K"], cfg["lengths"], Fraction(cfg["q"]))
    print({k: float(p) for k, p in sorted(probs.items())})
    return 0


def _run_simulate(cfg):
    samples = step_height_samples(cfg["t"], cfg["q"], cfg["xs"], cfg["reps"],
                                  cfg["seed"], tol=cfg["tol"],
                                  window=cfg["window"],
                                  n_jobs=cfg["threads"])
    print("# columns: replica\t" + "\t".join(f"h({x!r})" for x in cfg["xs"]))
    for i in range(cfg["reps"]):
        row = "\t".join(str(int(v)) for v in samples.heights[i])
        print(f"{i}\t{row}")
    if samples.touched_frac > 0:
        print(f"# warning: window touched in {samples.touched_frac!r} "
              "of replicas")
    return 0


def _run_verify_one_point(cfg):
    rep = verify_one_point(cfg["K"], cfg["q"], cfg["t"], cfg["x"],
                           cfg["reps"], cfg["seed"], tol=cfg["tol"],
                           tv_threshold=cfg["tv_threshold"],
                           alpha=cfg["alpha"], n_jobs=cfg["threads"])
    return _emit_report("verify one-point", cfg, rep)


def _run_verify_many_point(cfg):
    rep = verify_many_point(cfg["K"], cfg["q"], cfg["t"], cfg["xs"],
                            cfg["reps"], cfg["seed"], tol=cfg["tol"],
                            tv_threshold=cfg["tv_threshold"],
                            alpha=cfg["alpha"], n_jobs=cfg["threads"])
    return _emit_report("verify many-point", cfg, rep)


def _run_verify_coloring(cfg):
    rep = verify_color_preservation(cfg["K"], cfg["L"], cfg["q"], cfg["t"],
                                    cfg["reps"], cfg["seed"], tol=cfg["tol"],
                                    alpha=cfg["alpha"], n_jobs=cfg["threads"])
    return _emit_report("verify coloring", cfg, rep)


def _run_verify_diffusive(cfg):
    rep = diffusive_experiment(cfg["K"], cfg["q"], cfg["t"], cfg["rs"],
                               cfg["reps"], cfg["seed"], tol=cfg["tol"],
                               tv_threshold=cfg["tv_threshold"],
                               n_jobs=cfg["threads"])
    return _emit_report("verify diffusive", cfg, rep)


def _run_verify_kpz_lln(cfg):
    rep = kpz_lln_experiment(cfg["eps"], cfg["c"], cfg["d"], cfg["reps"],
                             cfg["seed"])
    return _emit_report("verify kpz-lln", cfg, rep)


def _run_verify_kpz_coupling(cfg):
    rep = kpz_coupling_experiment(cfg["eps"], cfg["c"], cfg["hat_t"],
                                  cfg["reps"], cfg["seed"], tol=cfg["tol"],
                                  n_jobs=cfg["threads"])
    return _emit_report("verify kpz-coupling", cfg, rep)


def _run_hermite_check(cfg):
    wt = weighted_trace(cfg["r"], cfg["q"])
    cf = closed_form_first_moment(cfg["r"], cfg["q"])
    print(f"weighted_trace = {wt!r}")
    print(f"closed form = {cf!r}")
    ok = abs(wt - cf) <= 1e-8
    print("PASS" if ok else "FAIL")
    return 0 if ok else 2


def _run_xi_pmf(cfg):
    xi = xi_pmf(cfg["r"], cfg["q"], cfg["L_max"])
    print(f"reliable = {xi.reliable}")
    print(f"residual = {xi.residual!r}")
    print(f"total_mass = {xi.total_mass()!r}")
    print({L: p for L, p in xi.as_dict().items() if p > 0.0})
    return 0


def _run_calibrate(cfg):
    rep = calibrate(cfg["seed"], n_runs=cfg["runs"], n_draws=cfg["draws"])
    return _emit_report("calibrate", cfg, rep)


_DISPATCH = {
    "sample-mallows": _run_sample_mallows,
    "pmf": _run_pmf,
    "pmf-multi": _run_pmf_multi,
    "simulate": _run_simulate,
    "verify one-point": _run_verify_one_point,
    "verify many-point": _run_verify_many_point,
    "verify coloring": _run_verify_coloring,
    "verify diffusive": _run_verify_diffusive,
    "verify kpz-lln": _run_verify_kpz_lln,
    "verify kpz-coupling": _run_verify_kpz_coupling,
    "hermite-check": _run_hermite_check,
    "xi-pmf": _run_xi_pmf,
    "calibrate": _run_calibrate,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)

    try:
        file_entries = read_config_file(ns.config) if ns.config else {}
        command = ns.command
        if command == "verify":
            if not getattr(ns, "variant", None):
                raise ConfigError("verify needs a variant: one-point, "
                                  "many-point, coloring, diffusive, "
                                  "kpz-lln, or kpz-coupling")
            command = f"verify {ns.variant}"
        if command is None:
            command = file_entries.get("experiment")
            if command is None:
                raise ConfigError("no subcommand given and no 'experiment' "
                                  "field in the config file")
            if command not in COMMANDS:
                raise ConfigError(f"unknown experiment {command!r}")
        cfg = _merge_config(command, file_entries, ns)
        _echo(command, cfg)
        return _DISPATCH[command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BudgetError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
