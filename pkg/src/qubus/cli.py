"""``qubus`` command-line front end.

Subcommands emit CSV (one header row, 12 significant digits) or JSON.
Settings come from an optional flat ``key = value`` config file; flags on
the command line override it.

Exit codes: 0 success, 2 invalid configuration, 3 numeric assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import sweeps
from .params import DEFAULT_LOSS_DB_PER_KM, LAMBDA_MAX, LinkParams
from .swapping import DISCRIMINATORS, SCHEMES

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# per-command defaults (strings are parsed like command-line values)
DEFAULTS = {
    "fig2": {"alpha_range": "1:600:200", "distance_range": "1,5,10,20"},
    "fig4": {"fidelity_range": "0.51:1:50", "distance_range": "5,10,17,30,50,100"},
    "fig6": {"fidelity_range": "0.51:1:50", "distance_range": "10,20,30,50"},
    "montecarlo": {"alpha_range": "100", "distance_range": "17", "lambda": "0.4"},
    "link": {"alpha_range": "100", "distance_range": "17"},
    "swap": {"alpha_range": "3", "theta": "0.6", "distance_range": "0"},
}
COMMON_DEFAULTS = {
    "theta": "0.01",
    "loss_db_per_km": str(DEFAULT_LOSS_DB_PER_KM),
    "lambda": "0.7",
    "scheme": None,
    "trials": "1000000",
    "seed": "0",
    "format": "csv",
    "out": None,
    "window": None,
    "strict": "false",
    "number_resolving": "false",
}
CONFIG_KEYS = set(COMMON_DEFAULTS) | {"alpha_range", "distance_range", "fidelity_range"}


class ConfigError(ValueError):
    pass


def parse_range(text: str, name: str) -> list[float]:
    """``start:stop:num`` (inclusive linspace), a comma list, or a single number."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
            if num < 1:
                raise ValueError
            values = list(np.linspace(start, stop, num))
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse range {text!r} (use start:stop:num or a comma list)") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{name}: range must be non-empty and finite")
    return [float(v) for v in values]


def _parse_bool(text, name: str) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {text!r}")


def read_config(path: str) -> dict:
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        cfg[key] = value
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--alpha-range", dest="alpha_range", help="qubus amplitudes: start:stop:num or a,b,c")
    common.add_argument("--theta", help="controlled-rotation angle (rad)")
    common.add_argument("--distance-range", dest="distance_range", help="link lengths in km")
    common.add_argument("--fidelity-range", dest="fidelity_range", help="target fidelities (fig4, fig6)")
    common.add_argument("--loss-db-per-km", dest="loss_db_per_km", help="fibre loss (default 0.18)")
    common.add_argument("--lambda", dest="lambda", help="receiver splitting parameter in [0, 1/sqrt(2)]")
    common.add_argument("--scheme", help=f"link: one of {SCHEMES}; swap: one of {DISCRIMINATORS}")
    common.add_argument("--window", help="homodyne p-window half-width")
    common.add_argument("--trials", help="Monte-Carlo trial count")
    common.add_argument("--seed", help="random seed")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--strict", action="store_const", const="true",
                        help="montecarlo: exit 3 if any |z| exceeds 4")
    common.add_argument("--number-resolving", dest="number_resolving", action="store_const", const="true",
                        help="swap: identify the second Bell pair with an ideal number-resolving detector")

    parser = argparse.ArgumentParser(prog="qubus", description="Qubus repeater link calculations.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fig2": "entanglement of formation of the qubit-qubus state vs alpha",
        "fig4": "optimal USD failure probability vs target fidelity",
        "fig6": "failure probabilities of the receiver schemes vs target fidelity",
        "montecarlo": "sampled receiver patterns against the analytic distribution",
        "link": "single elementary-link report",
        "swap": "entanglement swapping of two identical links",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[args.command])
    if args.config:
        cfg.update(read_config(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _float(cfg: dict, key: str) -> float:
    try:
        value = float(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def _single(cfg: dict, key: str) -> float:
    values = parse_range(cfg[key], key)
    if len(values) != 1:
        raise ConfigError(f"{key}: this command takes a single value, got {len(values)}")
    return values[0]


def _nonneg(values, name):
    if any(v < 0 for v in values):
        raise ConfigError(f"{name}: values must be non-negative")
    return values


def _link_params(cfg: dict) -> LinkParams:
    try:
        return LinkParams(alpha=_single(cfg, "alpha_range"), theta=_float(cfg, "theta"),
                          distance_km=_single(cfg, "distance_range"), loss_db_per_km=_float(cfg, "loss_db_per_km"),
                          lambda_bs=_float(cfg, "lambda"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _window(cfg: dict):
    if cfg["window"] is None:
        return None
    w = _float(cfg, "window")
    if w <= 0:
        raise ConfigError("window: must be positive")
    return w


def run(cfg: dict, command: str):
    """Return (columns, rows, extra) for a resolved configuration."""
    loss = _float(cfg, "loss_db_per_km")
    theta = _float(cfg, "theta")
    if loss < 0:
        raise ConfigError("loss_db_per_km: must be non-negative")
    if not 0 <= _float(cfg, "lambda") <= LAMBDA_MAX + 1e-12:
        raise ConfigError("lambda: must lie in [0, 1/sqrt(2)]")
    extra = {}
    if command == "fig2":
        alphas = _nonneg(parse_range(cfg["alpha_range"], "alpha_range"), "alpha_range")
        dists = _nonneg(parse_range(cfg["distance_range"], "distance_range"), "distance_range")
        cols, rows = sweeps.fig2_table(alphas, dists, theta, loss)
    elif command in ("fig4", "fig6"):
        fids = parse_range(cfg["fidelity_range"], "fidelity_range")
        dists = _nonneg(parse_range(cfg["distance_range"], "distance_range"), "distance_range")
        if not all(0.5 < f <= 1.0 for f in fids):
            raise ConfigError("fidelity_range: values must lie in (0.5, 1]")
        if loss <= 0 or not all(d > 0 for d in dists):
            raise ConfigError("fig4/fig6 need a lossy link: positive distances and loss")
        if command == "fig4":
            cols, rows = sweeps.fig4_table(fids, dists, loss)
        else:
            if theta == 0:
                raise ConfigError("theta: must be non-zero")
            cols, rows = sweeps.fig6_table(fids, dists, theta, loss)
    elif command == "montecarlo":
        params = _link_params(cfg)
        try:
            trials, seed = int(cfg["trials"]), int(cfg["seed"])
        except ValueError:
            raise ConfigError("trials and seed must be integers") from None
        if trials < 1:
            raise ConfigError("trials: must be at least 1")
        rep = sweeps.montecarlo_table(params, trials, seed)
        cols, rows = rep.columns, rep.rows
        extra = {"trials": trials, "seed": seed, "max_abs_z": rep.max_abs_z}
        if _parse_bool(cfg["strict"], "strict") and not rep.max_abs_z <= sweeps.Z_LIMIT:
            raise sweeps.NumericAssertion(f"max |z| = {rep.max_abs_z:.3f} exceeds {sweeps.Z_LIMIT}")
    elif command == "link":
        params = _link_params(cfg)
        scheme = cfg["scheme"] or "even"
        if scheme not in SCHEMES:
            raise ConfigError(f"scheme: choose from {SCHEMES}")
        try:
            cols, rows = sweeps.link_table(params, scheme, _window(cfg))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif command == "swap":
        params = _link_params(cfg)
        disc = cfg["scheme"] or "usd_unrotated"
        if disc not in DISCRIMINATORS:
            raise ConfigError(f"scheme: choose from {DISCRIMINATORS}")
        try:
            seed = int(cfg["seed"])
            cols, rows = sweeps.swap_table(params, disc, _window(cfg),
                                           _parse_bool(cfg["number_resolving"], "number_resolving"), seed)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigError(f"unknown command {command!r}")
    for row in rows:
        for cell in row:
            if isinstance(cell, float) and not math.isfinite(cell) and command != "link":
                raise sweeps.NumericAssertion(f"non-finite cell in {command} output")
    return cols, rows, extra


def _fmt(cell) -> str:
    if isinstance(cell, float):
        return f"{cell:.12g}"
    return str(cell)


def render(cols, rows, extra: dict, fmt: str, command: str) -> str:
    if fmt == "json":
        payload = {"command": command, **extra, "columns": list(cols),
                   "rows": [dict(zip(cols, row)) for row in rows]}
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        fmt = cfg["format"]
        if fmt not in ("csv", "json"):
            raise ConfigError("format: choose csv or json")
        cols, rows, extra = run(cfg, args.command)
    except ConfigError as exc:
        print(f"qubus: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sweeps.NumericAssertion as exc:
        print(f"qubus: numeric assertion failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(cols, rows, extra, fmt, args.command)
    if cfg["out"]:
        try:
            Path(cfg["out"]).write_text(text)
        except OSError as exc:
            print(f"qubus: cannot write {cfg['out']}: {exc.strerror}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
