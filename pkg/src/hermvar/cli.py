"""Command-line front end: ``hermvar <subcommand> [flags]``.

Parameters come from three layers, later ones winning: built-in defaults,
a JSON/YAML config file (``--config``, which may also be a manifest written
by an earlier run), and command-line flags.  With ``--output`` a manifest
``<output>.manifest.json`` records the resolved configuration, the tool
version and the wall time; passing it back through ``--config`` reproduces
the output bit for bit.

Exit codes: 0 success, 2 invalid configuration, 3 numeric range error,
4 I/O error.  Failures print one JSON object to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass
from importlib import metadata
from typing import Any, Callable

import yaml

from . import bounds as _bounds
from . import fbm as _fbm
from . import harness as _harness
from .errors import ConfigError, EmbeddingError, FactorizationError, ParameterRangeError
from .kernel import check_hurst, sigma_sq
from .seeds import MASK64
from .variations import (
    VariationConfig,
    path_statistics,
    residual_exponent,
    residual_second_moment_exact,
)
from .weights import CATALOG, weight

__all__ = ["RunConfig", "SUBCOMMANDS", "parse_n_grid", "build_parser", "resolve", "run", "main"]

CSV_SCHEMA = "hermvar-csv v1"
EXIT_CONFIG, EXIT_RANGE, EXIT_IO = 2, 3, 4
FORMATS = ("csv", "json")


def parse_n_grid(spec) -> list[int]:
    """``"256:8192:dyadic"``, ``"256,512,1024"`` or a list of integers."""
    if isinstance(spec, (list, tuple)):
        try:
            return [int(v) for v in spec]
        except (TypeError, ValueError):
            raise ConfigError(f"bad n grid {spec!r}") from None
    text = str(spec).strip()
    try:
        if ":" in text:
            lo, hi, kind = text.split(":")
            lo, hi = int(lo), int(hi)
            if kind != "dyadic":
                raise ConfigError(f"only dyadic grids are supported, got {kind!r}")
            if lo < 1 or lo & (lo - 1) or hi & (hi - 1) or hi < lo:
                raise ConfigError(f"dyadic grid endpoints must be powers of 2 with lo <= hi: {text}")
            grid = []
            while lo <= hi:
                grid.append(lo)
                lo *= 2
            return grid
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad n grid {text!r}") from None


# name -> (flag, type, default, help); shared by argparse and config files
_P = {
    "H": ("--H", float, None, "Hurst parameter in (0, 1)"),
    "q": ("--q", int, 2, "Hermite order"),
    "n": ("--n", int, 1024, "grid size"),
    "N": ("--N", int, 10000, "Monte Carlo replicates"),
    "n_grid": ("--n-grid", str, "256:4096:dyadic", "grid, e.g. 256:8192:dyadic or 256,512"),
    "weight": ("--weight", str, "x", f"weight f, one of {', '.join(CATALOG)}"),
    "phi": ("--phi", str, "cos", f"test function, one of {', '.join(_harness.TEST_FUNCTIONS)}"),
    "phi_a": ("--phi-a", float, 1.0, "test-function scale a"),
    "g": ("--g", str, "sin", "second test function, applied to B_1"),
    "g_a": ("--g-a", float, 1.0, "scale of g"),
    "method": ("--method", str, "circulant", "fBm generator: circulant or cholesky"),
    "coupled": ("--coupled", int, 1, "1 for common random numbers, 0 for independent paths"),
    "tol": ("--tol", float, 1e-12, "absolute tolerance"),
    "lemma": ("--lemma", str, "beta_double", f"one of {', '.join(_bounds.LEMMAS)}"),
    "a": ("--a", float, 1.0, "power a"),
    "b": ("--b", float, 1.0, "power b"),
    "t_grid": ("--t-grid", int, 256, "t grid size"),
    "residual_method": ("--residual-method", str, "fft", "fft or direct"),
}

SUBCOMMANDS: dict[str, tuple[str, ...]] = {
    "simulate": ("H", "n", "method", "q", "weight"),
    "sigma": ("H", "q", "tol"),
    "rate": ("H", "q", "n_grid", "N", "weight", "phi", "phi_a", "method", "coupled"),
    "fngn": ("H", "q", "n_grid", "N", "weight", "method"),
    "bounds": ("lemma", "H", "n_grid", "a", "b", "t_grid"),
    "residual": ("H", "n_grid", "residual_method"),
    "breuer-major": ("H", "q", "n", "N", "method"),
    "stable": ("H", "q", "n", "N", "weight", "phi", "phi_a", "g", "g_a", "method"),
}


@dataclass
class RunConfig:
    subcommand: str
    parameters: dict
    master_seed: int = 0
    workers: int = 1
    output_path: str | None = None
    format: str = "csv"

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "parameters": dict(self.parameters),
            "master_seed": self.master_seed,
            "workers": self.workers,
            "output_path": self.output_path,
            "format": self.format,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if "config" in d and "subcommand" not in d:
            d = d["config"]  # a manifest
        try:
            return cls(d["subcommand"], dict(d.get("parameters", {})), d.get("master_seed", 0),
                       d.get("workers", 1), d.get("output_path"), d.get("format", "csv"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed run configuration: {exc}") from None

    def emit(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hermvar", description="Weighted Hermite variations of fBm.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, params in SUBCOMMANDS.items():
        p = sub.add_parser(name)
        for key in params:
            flag, typ, _, help_ = _P[key]
            p.add_argument(flag, dest=key, type=typ, default=argparse.SUPPRESS, help=help_)
        p.add_argument("--seed", dest="master_seed", type=int, default=argparse.SUPPRESS,
                       help="master seed (64-bit)")
        p.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                       help=f"worker processes (default ${_harness.WORKERS_ENV} or 1)")
        p.add_argument("--output", dest="output_path", default=argparse.SUPPRESS,
                       help="output file; a manifest is written alongside")
        p.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS)
        p.add_argument("--config", default=None, help="JSON or YAML config or manifest")
    return parser


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    if "config" in data and "subcommand" not in data:
        # a manifest: rerun the same configuration, but never onto the same file
        data = dict(data["config"])
        data.pop("output_path", None)
    return data


def resolve(argv: list[str]) -> RunConfig:
    """Merge defaults, config file and flags, then validate."""
    ns = vars(build_parser().parse_args(argv))
    sub = ns.pop("subcommand")
    cfg_path = ns.pop("config", None)
    file_data = _load_config_file(cfg_path) if cfg_path else {}
    if file_data.get("subcommand", sub) != sub:
        raise ConfigError(f"config file is for {file_data['subcommand']!r}, not {sub!r}")
    params = {k: _P[k][2] for k in SUBCOMMANDS[sub]}
    file_params = file_data.get("parameters", {})
    unknown = set(file_params) - set(params)
    if unknown:
        raise ConfigError(f"unknown parameters for {sub}: {sorted(unknown)}")
    params.update(file_params)
    for key in SUBCOMMANDS[sub]:
        if key in ns:
            params[key] = ns.pop(key)
    top = {
        "master_seed": file_data.get("master_seed", 0),
        "workers": file_data.get("workers", _harness.default_workers()),
        "output_path": file_data.get("output_path"),
        "format": file_data.get("format", "csv"),
    }
    top.update(ns)
    config = RunConfig(sub, params, **top)
    validate(config)
    return config


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate(config: RunConfig) -> None:
    """Check every parameter against the target operation's preconditions."""
    sub, p = config.subcommand, config.parameters
    _require(sub in SUBCOMMANDS, f"unknown subcommand {sub!r}")
    _require(isinstance(config.master_seed, int) and 0 <= config.master_seed <= MASK64,
             "seed must be an integer in [0, 2^64)")
    _require(isinstance(config.workers, int) and config.workers >= 1, "workers must be >= 1")
    _require(config.format in FORMATS, f"format must be one of {FORMATS}")
    _require(p.get("H") is not None, "--H is required")
    p["H"] = check_hurst(p["H"])
    if "n_grid" in p:
        p["n_grid"] = parse_n_grid(p["n_grid"])
    if "method" in p:
        _require(p["method"] in ("circulant", "cholesky"), "method must be circulant or cholesky")
    for key in ("phi", "g"):
        if key in p:
            _require(p[key] in _harness.TEST_FUNCTIONS, f"unknown test function {p[key]!r}")
    if "weight" in p:
        _require(p["weight"] in CATALOG, f"unknown weight {p['weight']!r}")
    if "q" in p:
        _require(isinstance(p["q"], int) and 1 <= p["q"] <= 64, "q must be an integer in [1, 64]")
    if sub == "simulate":
        _require(p["n"] >= 1, "n must be positive")
        if p["method"] == "cholesky":
            _require(p["n"] <= _fbm.CHOLESKY_CAP, f"cholesky needs n <= {_fbm.CHOLESKY_CAP}")
    elif sub == "sigma":
        _require(p["tol"] > 0, "tol must be positive")
        _require(p["q"] >= 1, "q must be positive")
    elif sub in ("rate", "fngn"):
        _harness._check_grid(p["n_grid"])
        _harness._check_experiment(VariationConfig(p["q"], p["H"], p["n_grid"][0]), p["N"])
        if sub == "rate":
            _require(p["coupled"] in (0, 1), "coupled must be 0 or 1")
        else:
            weight(p["weight"], max(p["q"], 16)).derivative(p["q"])
    elif sub == "bounds":
        _require(p["lemma"] in _bounds.LEMMAS, f"unknown lemma {p['lemma']!r}")
        _require(p["a"] >= 1 and p["b"] >= 1, "powers a and b must be >= 1")
        _require(p["t_grid"] >= 64, "t grid size must be at least 64")
        _require(len(p["n_grid"]) >= 3, "n grid needs at least 3 points")
        _require(min(p["n_grid"]) >= 2, "grid sizes must be >= 2")
    elif sub == "residual":
        _require(p["residual_method"] in ("fft", "direct"), "residual method must be fft or direct")
        _require(len(p["n_grid"]) >= 3 and min(p["n_grid"]) >= 2,
                 "n grid needs at least 3 points, each >= 2")
    elif sub == "breuer-major":
        _require(p["H"] < 1 - 1 / (2 * p["q"]), "Breuer-Major check needs H < 1 - 1/(2q)")
        _require(p["N"] >= 2 and p["n"] >= 1, "need N >= 2 and n >= 1")
    elif sub == "stable":
        _harness._check_experiment(VariationConfig(p["q"], p["H"], p["n"]), p["N"])


# -- subcommand bodies: each returns (rows, summary) ---------------------------

def _cfg_rows(results, extra_keys=()) -> list[dict]:
    rows = []
    for r in results:
        row = {"n": r.config.n, "N": r.replicates, "estimate": r.estimate, "stderr": r.stderr}
        for k in extra_keys:
            row[k] = r.extras[k]
        rows.append(row)
    return rows


def _fit_summary(fit: _harness.RateFit) -> dict:
    d = fit.to_dict()
    d.pop("results")
    return d


def _do_simulate(c: RunConfig):
    p = c.parameters
    path = _fbm.generate(p["H"], p["n"], c.master_seed, p["method"])
    rows = [{"k": k, "t": k / path.n, "B": float(b)} for k, b in enumerate(path.values)]
    f = weight(p["weight"], max(p["q"], 16))
    try:
        stats = path_statistics(path, f, p["q"])
    except ParameterRangeError as exc:
        # sigma^2 diverges for this (H, q); the path itself is still valid
        stats = {"error": str(exc)}
    return rows, {"method": path.method, "seed": path.seed, "statistics": stats}


def _do_sigma(c: RunConfig):
    p = c.parameters
    s = sigma_sq(p["H"], p["q"], p["tol"])
    return [{"H": p["H"], "q": p["q"], "sigma_sq": s.value, "tail_bound": s.tail_bound,
             "truncation_K": s.truncation_K}], {}


def _do_rate(c: RunConfig):
    p = c.parameters
    cfg = VariationConfig(p["q"], p["H"], p["n_grid"][0])
    f = weight(p["weight"], max(p["q"], 16))
    phi = _harness.test_function(p["phi"], p["phi_a"])
    fit = _harness.rate_experiment(cfg, p["n_grid"], f, phi, p["N"], c.master_seed,
                                   coupled=bool(p["coupled"]), method=p["method"],
                                   workers=c.workers)
    rows = _cfg_rows(fit.results, ("signed_difference",))
    for row in rows:
        row.update(target_exponent=fit.target, fitted_slope=fit.slope)
    return rows, _fit_summary(fit)


def _do_fngn(c: RunConfig):
    p = c.parameters
    cfg = VariationConfig(p["q"], p["H"], p["n_grid"][0])
    f = weight(p["weight"], max(p["q"], 16))
    fit = _harness.fn_gn_decay(cfg, p["n_grid"], f, p["N"], c.master_seed,
                               method=p["method"], workers=c.workers)
    keys = [f"mean_K{r}_sq" for r in range(1, p["q"] + 1)]
    rows = _cfg_rows(fit.results, keys)
    for row in rows:
        row.update(target_exponent=fit.target, fitted_slope=fit.slope)
    return rows, _fit_summary(fit)


def _do_bounds(c: RunConfig):
    p = c.parameters
    rows, fit = _bounds.lemma_sweep(p["lemma"], p["H"], p["n_grid"], p["a"], p["b"], p["t_grid"])
    return rows, {"fit": fit.to_dict()}


def _do_residual(c: RunConfig):
    p = c.parameters
    values = [residual_second_moment_exact(p["H"], n, p["residual_method"]) for n in p["n_grid"]]
    fit = _bounds.fit_exponent(zip(p["n_grid"], values))
    gamma = residual_exponent(p["H"])
    rows = [{"n": n, "residual_second_moment": v, "predicted_exponent": gamma,
             "fitted_slope": fit.slope} for n, v in zip(p["n_grid"], values)]
    return rows, {"fit": fit.to_dict(), "predicted_exponent": gamma}


def _do_breuer_major(c: RunConfig):
    p = c.parameters
    r = _harness.breuer_major_check(p["q"], p["H"], p["n"], p["N"], c.master_seed,
                                    method=p["method"], workers=c.workers)
    row = {"q": p["q"], "H": p["H"], "n": p["n"], "N": p["N"], "variance": r.estimate,
           "stderr": r.stderr}
    row.update({k: r.extras[k] for k in ("sigma_sq", "finite_n_variance", "z_limit",
                                         "z_finite_n", "within_4se")})
    return [row], {}


def _do_stable(c: RunConfig):
    p = c.parameters
    cfg = VariationConfig(p["q"], p["H"], p["n"])
    r = _harness.stable_convergence_check(
        cfg, weight(p["weight"], max(p["q"], 16)), _harness.test_function(p["phi"], p["phi_a"]),
        _harness.test_function(p["g"], p["g_a"]), p["N"], c.master_seed,
        method=p["method"], workers=c.workers)
    row = {"q": p["q"], "H": p["H"], "n": p["n"], "N": p["N"], "estimate": r.estimate,
           "stderr": r.stderr, "signed_difference": r.extras["signed_difference"]}
    return [row], {}


_RUNNERS: dict[str, Callable[[RunConfig], tuple[list[dict], dict]]] = {
    "simulate": _do_simulate,
    "sigma": _do_sigma,
    "rate": _do_rate,
    "fngn": _do_fngn,
    "bounds": _do_bounds,
    "residual": _do_residual,
    "breuer-major": _do_breuer_major,
    "stable": _do_stable,
}


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(config: RunConfig, rows: list[dict], summary: dict) -> str:
    if config.format == "json":
        return json.dumps({"subcommand": config.subcommand, "parameters": config.parameters,
                           "master_seed": config.master_seed, "rows": rows,
                           "summary": summary}, indent=2, sort_keys=True, default=_json_default) + "\n"
    buf = io.StringIO()
    buf.write(f"# {CSV_SCHEMA} subcommand={config.subcommand}\n")
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(rows[0].keys())
        for row in rows:
            writer.writerow(_cell(v) for v in row.values())
    return buf.getvalue()


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__
        return __version__


def manifest_path(output_path: str) -> str:
    return output_path + ".manifest.json"


def run(config: RunConfig, stdout=None) -> int:
    """Execute a validated configuration, write results and the manifest."""
    validate(config)
    t0 = time.perf_counter()
    rows, summary = _RUNNERS[config.subcommand](config)
    text = render(config, rows, summary)
    wall = time.perf_counter() - t0
    if config.output_path is None:
        (stdout or sys.stdout).write(text)
        return 0
    with open(config.output_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    manifest = {"config": config.to_dict(), "version": _version(), "wall_time": wall}
    with open(manifest_path(config.output_path), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _fail(category: str, code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"status": "error", "category": category, "exit_code": code,
                                 "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = resolve(argv)
        return run(config)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except (ParameterRangeError, EmbeddingError, FactorizationError, ArithmeticError) as exc:
        return _fail("numeric", EXIT_RANGE, exc)
    except OSError as exc:
        return _fail("io", EXIT_IO, exc)


if __name__ == "__main__":
    sys.exit(main())
