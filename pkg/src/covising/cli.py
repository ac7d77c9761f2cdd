"""Command-line front end.

Each command resolves its settings as defaults < ``--config`` file < explicit
flags, writes the resolved settings to ``<out>/run_config.json`` and can be
rerun from that file alone.

Exit codes: 0 success, 2 usage, 3 parse error, 4 dimension mismatch,
5 non-convergence (outputs are still written), 6 constant response column.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import (
    auc,
    hub_ranking,
    rank_edges,
    roc_curve,
    select_lambda_validation,
    stability_selection,
)
from .fit import (
    DegenerateResponseError,
    FitConfig,
    NodeEstimates,
    default_lambda_grid,
    fit_joint,
    fit_path,
    fit_separate,
    lambda_max,
)
from .io import (
    ParseError,
    atomic_write,
    format_float,
    read_dataset,
    read_theta,
    write_dataset,
    write_graph,
    write_table,
    write_theta,
)
from .model import Dataset, DimensionError, ModelDims
from .simulate import SimConfig, sample_dataset, simulate_dataset
from .theory import assumption_report, empirical_info, population_info_mc

log = logging.getLogger("covising")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_DIMENSION = 4
EXIT_NONCONVERGED = 5
EXIT_DEGENERATE = 6

COMMON = {
    "seed": 0,
    "mode": "separate-max",
    "lambda": None,
    "lambda_grid": 50,
    "lambda_ratio": 0.01,
    "out": ".",
    "threads": 1,
    "scope": "all",
    "tol": 1e-6,
    "max_passes": 10_000,
    "standardize": True,
}

DEFAULTS = {
    "simulate": {
        "q": 10, "p": 20, "n": 200, "n_E": 20, "rho": 0.5, "beta": 4.0,
        "gibbs_sweeps": 500, "p_noise": 0, "n_valid": 0,
    },
    "fit": {"data": ".", "valid": None, "init": None},
    "path": {"data": "."},
    "roc": {"data": ".", "truth": None, "svg": False},
    "stability": {"data": ".", "n_subsamples": 100, "groups": None, "error_control": None},
    "hubs": {"data": ".", "n_subsamples": 100},
    "assumptions": {
        "truth": None, "data": None, "n_mc": 100_000,
        "M": None, "C": None, "delta": None, "n": None,
    },
}

_TYPES = {
    "seed": int, "lambda_grid": int, "threads": int, "max_passes": int, "q": int, "p": int,
    "n": int, "n_E": int, "gibbs_sweeps": int, "p_noise": int, "n_valid": int,
    "n_subsamples": int, "n_mc": int, "lambda_ratio": float, "tol": float, "rho": float,
    "beta": float, "lambda": float, "error_control": float, "M": float, "C": float, "delta": float,
    "standardize": bool, "svg": bool,
    "mode": str, "scope": str, "out": str, "data": str, "valid": str, "init": str,
    "truth": str, "groups": str,
}


class ConfigError(ParseError):
    pass


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def load_config(path, command: str) -> dict:
    """Read a JSON settings file; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}:1: expected a JSON object of settings")
    allowed = set(COMMON) | set(DEFAULTS[command]) | {"command", "version"}
    out = {}
    for key, value in obj.items():
        where = f"{path}:{_line_of(text, key) or 1}"
        if key not in allowed:
            raise ConfigError(f"{where}: unknown setting {key!r} for command {command!r}")
        if key in ("command", "version"):
            continue
        out[key] = _coerce(key, value, where)
    return out


def _coerce(key, value, where):
    if value is None:
        return None
    kind = _TYPES.get(key, str)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: {key!r} must be true or false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: {key!r} must be an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: {key!r} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: {key!r} must be a string, got {value!r}")
    return value


def resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    if args.config:
        cfg.update(load_config(args.config, command))
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if cfg["mode"] not in ("separate-max", "separate-min", "joint"):
        raise ConfigError(f"mode must be separate-max, separate-min or joint, got {cfg['mode']!r}")
    if cfg["scope"] not in ("all", "edges"):
        raise ConfigError(f"scope must be all or edges, got {cfg['scope']!r}")
    return cfg


def _write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _echo_config(cfg: dict, command: str) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_config.json", {"command": command, "version": __version__, **cfg})
    return out


def _fit_config(cfg) -> FitConfig:
    rule = cfg["mode"] if cfg["mode"] != "joint" else "separate-max"
    return FitConfig(cfg["tol"], cfg["max_passes"], cfg["standardize"], rule)


def _grid(data: Dataset, cfg) -> np.ndarray:
    return default_lambda_grid(data, cfg["mode"], _fit_config(cfg), cfg["lambda_grid"], cfg["lambda_ratio"])


def cmd_simulate(cfg) -> int:
    out = _echo_config(cfg, "simulate")
    sim = SimConfig(
        ModelDims(cfg["q"], cfg["p"]), cfg["n"], cfg["n_E"], cfg["rho"], cfg["beta"],
        cfg["gibbs_sweeps"], cfg["seed"], cfg["p_noise"],
    )
    data, truth = simulate_dataset(sim)
    write_dataset(out, data)
    write_theta(out / "theta_star.json", truth.theta_star)
    write_graph(out / "graph.tsv", truth.graph)
    atomic_write(out / "seed.txt", f"{cfg['seed']}\n")
    if cfg["n_valid"]:
        rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]).spawn(6)[5])
        write_dataset(out / "valid", sample_dataset(truth, cfg["n_valid"], rng, cfg["gibbs_sweeps"]))
    print(f"wrote {data.n} rows, q={data.q}, p={data.p} to {out}")
    return EXIT_OK


def _edge_rows(theta):
    rows, cols = np.triu_indices(theta.q)
    for r, l in zip(*np.nonzero(theta.coef)):
        yield int(rows[r]), int(cols[r]), int(l), float(theta.coef[r, l])


def cmd_fit(cfg) -> int:
    out = _echo_config(cfg, "fit")
    data = read_dataset(cfg["data"])
    fc = _fit_config(cfg)
    lmax = lambda_max(data, cfg["mode"], fc)
    warnings = []
    if cfg["lambda"] is not None:
        lam = cfg["lambda"]
        init = read_theta(cfg["init"]) if cfg["init"] else None
        if init is not None and init.dims != data.dims:
            raise DimensionError(f"warm start has dims {init.dims}, data has {data.dims}")
        if cfg["mode"] == "joint":
            res = fit_joint(data, lam, fc, init)
        else:
            start = None if init is None else NodeEstimates(np.array(init.dense()))
            res = fit_separate(data, lam, fc, start, cfg["mode"])[0]
    elif cfg["valid"]:
        valid = read_dataset(cfg["valid"])
        lam, res = select_lambda_validation(data, valid, _grid(data, cfg), cfg["mode"], fc)
        warnings.append(f"lambda selected on validation data from {cfg['lambda_grid']}-point grid")
    else:
        raise ConfigError("fit needs --lambda or a validation directory (--valid)")
    if not res.converged:
        warnings.append("solver did not reach the KKT tolerance within max_passes")
    write_theta(out / "theta_hat.json", res.theta_hat)
    _write_json(out / "fit_report.json", {
        "lambda": res.lam, "lambda_max": lmax, "mode": res.mode, "objective": res.objective,
        "kkt_residual": res.kkt_residual, "passes": res.passes, "converged": res.converged,
        "support_size": res.support_size, "penalty_factor": res.penalty_factor.tolist(),
        "warnings": warnings,
    })
    write_table(out / "edge_list.tsv", _edge_rows(res.theta_hat), ["j", "k", "l", "value"], "\t")
    print(f"lambda={format_float(res.lam)} objective={format_float(res.objective)} "
          f"kkt={res.kkt_residual:.3g} converged={res.converged}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_path(cfg) -> int:
    out = _echo_config(cfg, "path")
    data = read_dataset(cfg["data"])
    path = fit_path(data, _grid(data, cfg), cfg["mode"], _fit_config(cfg))
    write_table(
        out / "path.csv",
        ([r.lam, r.support_size, r.objective, r.kkt_residual, int(r.converged), r.passes] for r in path),
        ["lambda", "support_size", "objective", "kkt_residual", "converged", "passes"],
    )
    print(f"{len(path)} path points written to {out / 'path.csv'}")
    return EXIT_OK if all(r.converged for r in path) else EXIT_NONCONVERGED


def _roc_svg(curve) -> str:
    fpr, tpr = curve.arrays()
    pts = " ".join(f"{40 + 300 * x:.2f},{340 - 300 * y:.2f}" for x, y in zip(fpr, tpr))
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" width="380" height="380">\n'
        '<rect x="40" y="40" width="300" height="300" fill="none" stroke="black"/>\n'
        '<line x1="40" y1="340" x2="340" y2="40" stroke="grey" stroke-dasharray="4"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>\n'
        '<text x="190" y="370" text-anchor="middle">1 - specificity</text>\n'
        '<text x="15" y="190" transform="rotate(-90 15 190)" text-anchor="middle">sensitivity</text>\n'
        "</svg>\n"
    )


def cmd_roc(cfg) -> int:
    out = _echo_config(cfg, "roc")
    if not cfg["truth"]:
        raise ConfigError("roc needs a ground truth file (--truth)")
    data = read_dataset(cfg["data"])
    truth = read_theta(cfg["truth"])
    if truth.dims != data.dims:
        raise DimensionError(f"truth has dims {truth.dims}, data has {data.dims}")
    path = fit_path(data, _grid(data, cfg), cfg["mode"], _fit_config(cfg))
    curve = roc_curve(path, truth, cfg["scope"])
    write_table(
        out / "roc.csv",
        ([pt.lam, pt.sensitivity, pt.one_minus_specificity, pt.tp, pt.fp, pt.tn, pt.fn]
         for pt in curve.points),
        ["lambda", "sensitivity", "one_minus_specificity", "tp", "fp", "tn", "fn"],
    )
    area = auc(curve)
    atomic_write(out / "auc.txt", format_float(area) + "\n")
    if cfg["svg"]:
        atomic_write(out / "roc.svg", _roc_svg(curve))
    print(f"auc={format_float(area)}")
    return EXIT_OK


def _read_groups(path, q):
    labels = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    if len(labels) != q:
        raise DimensionError(f"{path}: {len(labels)} group labels for {q} nodes")
    return labels


def cmd_stability(cfg) -> int:
    out = _echo_config(cfg, "stability")
    data = read_dataset(cfg["data"])
    groups = _read_groups(cfg["groups"], data.q) if cfg["groups"] else None
    summary = stability_selection(
        data, _grid(data, cfg), cfg["mode"], _fit_config(cfg), cfg["n_subsamples"], cfg["seed"],
        error_control=cfg["error_control"],
    )
    rows, cols = np.triu_indices(data.q)
    table = []
    for r, (j, k) in enumerate(zip(rows, cols)):
        for l in range(data.p + 1):
            if j == k and l == 0:
                continue
            table.append([int(j), int(k), l, float(summary.fstar[r, l]), float(summary.argmax_lambda[r, l])])
    write_table(out / "stability.csv", table, ["j", "k", "l", "fstar", "argmax_lambda"])
    for l in range(data.p + 1):
        write_table(out / f"edge_rank_{l}.tsv", rank_edges(summary, l, groups), ["j", "k", "freq"], "\t")
    if summary.n_skipped:
        print(f"warning: {summary.n_skipped} degenerate subsample node fits recorded as all-zero")
    print(f"stability selection over {summary.n_subsamples} subsamples written to {out}")
    return EXIT_OK


def cmd_hubs(cfg) -> int:
    out = _echo_config(cfg, "hubs")
    data = read_dataset(cfg["data"])
    fc = _fit_config(cfg)
    grid = _grid(data, cfg)
    rng = np.random.default_rng(cfg["seed"])
    lam = cfg["lambda"]
    if lam is None:
        rows = rng.permutation(data.n)
        half = data.n // 2
        lam, _ = select_lambda_validation(
            data.subset(np.sort(rows[:half])), data.subset(np.sort(rows[half:])), grid, cfg["mode"], fc
        )
    summary = stability_selection(data, grid, cfg["mode"], fc, cfg["n_subsamples"], rng, retain_lambda=lam)
    for l in range(data.p + 1):
        ranking = hub_ranking(summary.retained, l)
        write_table(out / f"hub_rank_{l}.tsv", ranking.order, ["node", "median_rank"], "\t")
    _write_json(out / "hubs_report.json", {"lambda": summary.retained_lambda, "n_skipped": summary.n_skipped})
    print(f"hub rankings at lambda={format_float(summary.retained_lambda)} written to {out}")
    return EXIT_OK


def cmd_assumptions(cfg) -> int:
    out = _echo_config(cfg, "assumptions")
    if not cfg["truth"]:
        raise ConfigError("assumptions needs a ground truth file (--truth)")
    theta = read_theta(cfg["truth"])
    data = read_dataset(cfg["data"]) if cfg["data"] else None
    if data is not None and data.dims != theta.dims:
        raise DimensionError(f"truth has dims {theta.dims}, data has {data.dims}")
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["n"] or (data.n if data is not None else None)
    nodes = []
    for j in range(theta.q):
        if data is not None:
            info = empirical_info(data, theta, j)
        else:
            info = population_info_mc(theta, j, cfg["n_mc"], rng)
        rep = assumption_report(theta, info, cfg["lambda"], n, cfg["M"], cfg["C"], cfg["delta"])
        nodes.append(rep.as_dict())
    _write_json(out / "assumption_report.json", {
        "source": "empirical" if data is not None else "population-mc",
        "vacuous_all": all(r["vacuous"] for r in nodes),
        "nodes": nodes,
    })
    print(f"assumption report for {theta.q} nodes written to {out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "path": cmd_path,
    "roc": cmd_roc,
    "stability": cmd_stability,
    "hubs": cmd_hubs,
    "assumptions": cmd_assumptions,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covising", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON settings file")
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=["separate-max", "separate-min", "joint"])
        grid = p.add_mutually_exclusive_group()
        grid.add_argument("--lambda", dest="lambda", type=float)
        grid.add_argument("--lambda-grid", dest="lambda_grid", type=int)
        p.add_argument("--out")
        p.add_argument("--threads", type=int)
        p.add_argument("--scope", choices=["all", "edges"])
        if name != "simulate":
            p.add_argument("--data")
        if name == "fit":
            p.add_argument("--valid")
            p.add_argument("--init")
        if name in ("roc", "assumptions"):
            p.add_argument("--truth")
        if name == "roc":
            p.add_argument("--svg", action="store_true", default=None)
        if name in ("stability", "hubs"):
            p.add_argument("--n-subsamples", dest="n_subsamples", type=int)
        if name == "stability":
            p.add_argument("--groups")
            p.add_argument("--error-control", dest="error_control", type=float,
                           help="bound on expected false selections; trims the grid")
        if name == "simulate":
            for key in ("q", "p", "n", "n_E", "gibbs_sweeps", "p_noise", "n_valid"):
                p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
            for key in ("rho", "beta"):
                p.add_argument(f"--{key}", type=float)
        if name == "assumptions":
            p.add_argument("--n-mc", dest="n_mc", type=int)
            for key in ("M", "C", "delta"):
                p.add_argument(f"--{key}", type=float)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateResponseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
