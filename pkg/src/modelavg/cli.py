"""Config-driven command-line front end.

Each subcommand reads a YAML config, runs the wrapped library operation, and
writes CSV tables plus a JSON run-manifest into the output directory.  Output
files are deterministic functions of (config, seed) at any worker count.

Exit codes: 0 success (and all requested invariant checks pass), 1 usage,
2 validation, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time

import numpy as np
import yaml

from . import __version__
from .cdf_estimation import (
    ModelSelector,
    check_estimator,
    choose_radius_and_delta,
    non_uniformity_experiment,
    oscillation,
)
from .convergence import LadderSpec, ParameterPath, consistency_sweep, l1_ladder
from .design import LimitDesign, PartitionedDesign, exact_gram_design
from .estimator import AveragingConfig, batch_estimates, shrink_bound
from .laws import AT_INFINITY, AsymptoticLaw, FiniteSampleLaw
from .sampling import (
    sample_asymptotic,
    sample_chi_rep,
    sample_data_level,
    sample_root_rep,
)
from .shrink import ShrinkMap, g, h, jacobian_det, log_density_factor
from .tables import ResultTable, config_hash

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    """Raised for malformed or out-of-contract configuration files."""


def _require_keys(cfg: dict, allowed, required, where: str) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    missing = sorted(set(required) - set(cfg))
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path!r}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path!r}: top level must be a mapping")
    return cfg


def _read_design_csv(path: str, k1: int) -> PartitionedDesign:
    """Design CSV: rows = observations, columns = regressors, no header."""
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}:{lineno}: malformed CSV row: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read design CSV {path!r}: {exc}") from exc
    if not rows:
        raise ConfigError(f"design CSV {path!r} is empty")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"design CSV {path!r} has ragged rows")
    return PartitionedDesign.from_matrix(np.array(rows, dtype=float), k1)


def _parse_design(cfg: dict, where: str = "design") -> PartitionedDesign:
    _require_keys(cfg, ("csv", "k1", "synthetic"), (), where)
    if ("csv" in cfg) == ("synthetic" in cfg):
        raise ConfigError(f"{where}: give exactly one of 'csv' or 'synthetic'")
    if "csv" in cfg:
        if "k1" not in cfg:
            raise ConfigError(f"{where}: 'csv' requires 'k1'")
        return _read_design_csv(cfg["csv"], int(cfg["k1"]))
    syn = cfg["synthetic"]
    _require_keys(syn, ("n", "q", "k1", "orth_seed"), ("n", "q", "k1"),
                  f"{where}.synthetic")
    return exact_gram_design(int(syn["n"]), np.asarray(syn["q"], float),
                             int(syn["k1"]), int(syn.get("orth_seed", 0)))


def _parse_limit(cfg: dict, where: str = "limit") -> LimitDesign:
    _require_keys(cfg, ("q", "k1"), ("q", "k1"), where)
    return LimitDesign.from_q(np.asarray(cfg["q"], float), int(cfg["k1"]))


def _parse_gamma(value):
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return AT_INFINITY
        raise ConfigError(f"gamma: unrecognized string {value!r}")
    return np.atleast_1d(np.asarray(value, float))


def _parse_law(cfg: dict, where: str = "law"):
    _require_keys(cfg, ("type", "design", "beta", "limit", "gamma",
                        "sigma", "alpha"), ("type", "sigma", "alpha"), where)
    sigma, alpha = float(cfg["sigma"]), float(cfg["alpha"])
    if cfg["type"] == "finite":
        _require_keys(cfg, ("type", "design", "beta", "sigma", "alpha"),
                      ("design", "beta"), where)
        design = _parse_design(cfg["design"], f"{where}.design")
        return FiniteSampleLaw(design, np.asarray(cfg["beta"], float),
                               AveragingConfig(alpha=alpha, sigma=sigma))
    if cfg["type"] == "asymptotic":
        _require_keys(cfg, ("type", "limit", "gamma", "sigma", "alpha"),
                      ("limit", "gamma"), where)
        limit = _parse_limit(cfg["limit"], f"{where}.limit")
        return AsymptoticLaw(limit, _parse_gamma(cfg["gamma"]), sigma, alpha)
    raise ConfigError(f"{where}.type must be 'finite' or 'asymptotic'")


def _grid_axis(axis: dict, where: str) -> np.ndarray:
    _require_keys(axis, ("lo", "hi", "num"), ("lo", "hi", "num"), where)
    num = int(axis["num"])
    if num < 1:
        raise ConfigError(f"{where}: num must be >= 1")
    return np.linspace(float(axis["lo"]), float(axis["hi"]), num)


def cmd_estimate(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("design", "sigma", "alpha", "y"),
                  ("design", "sigma", "alpha", "y"), "estimate")
    design = _parse_design(cfg["design"])
    acfg = AveragingConfig(alpha=float(cfg["alpha"]), sigma=float(cfg["sigma"]))
    ycfg = cfg["y"]
    _require_keys(ycfg, ("csv", "synthetic"), (), "y")
    if ("csv" in ycfg) == ("synthetic" in ycfg):
        raise ConfigError("y: give exactly one of 'csv' or 'synthetic'")
    if "csv" in ycfg:
        ys = np.atleast_2d(np.loadtxt(ycfg["csv"], delimiter=",", ndmin=2))
        if ys.shape[1] != design.n:
            raise ConfigError(
                f"y CSV has {ys.shape[1]} columns, design has n={design.n}")
    else:
        syn = ycfg["synthetic"]
        _require_keys(syn, ("beta", "n_draws"), ("beta", "n_draws"),
                      "y.synthetic")
        beta = np.asarray(syn["beta"], float)
        rng = np.random.Generator(np.random.Philox(
            key=np.array([seed, 0], dtype=np.uint64)))
        ys = design.x @ beta + acfg.sigma * rng.standard_normal(
            (int(syn["n_draws"]), design.n))
    out = batch_estimates(design, ys, acfg)
    bound = shrink_bound(design, acfg)
    rn = np.sqrt(design.n)
    dev = rn * np.linalg.norm(out["beta_tilde"] - out["beta_u"], axis=1)
    k = design.k
    columns = (["row", "lam"]
               + [f"beta_tilde_{j}" for j in range(k)]
               + [f"beta_r_{j}" for j in range(k)]
               + [f"beta_u_{j}" for j in range(k)]
               + ["fit_gap", "bound_ok"])
    rows = []
    for i in range(ys.shape[0]):
        rows.append([i, float(out["lam"][i])]
                    + [float(v) for v in out["beta_tilde"][i]]
                    + [float(v) for v in out["beta_r"][i]]
                    + [float(v) for v in out["beta_u"][i]]
                    + [float(out["fit_gap"][i]), bool(dev[i] <= bound)])
    return ResultTable(tuple(columns), rows, {"shrink_bound": bound})


def cmd_density(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("law", "grid"), ("law", "grid"), "density")
    law = _parse_law(cfg["law"])
    grid = cfg["grid"]
    if not isinstance(grid, list) or len(grid) != law.k:
        raise ConfigError(f"grid: expected {law.k} axes")
    axes = [_grid_axis(ax, f"grid[{j}]") for j, ax in enumerate(grid)]
    pts = np.array(list(itertools.product(*axes)))
    dens = law.pdf(pts)
    columns = tuple([f"t_{j}" for j in range(law.k)] + ["density"])
    rows = [list(map(float, p)) + [float(d)] for p, d in zip(pts, dens)]
    return ResultTable(columns, rows)


def cmd_cdf(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("law", "points", "method", "n_draws"),
                  ("law", "points"), "cdf")
    law = _parse_law(cfg["law"])
    method = cfg.get("method", "quadrature")
    columns = tuple([f"t_{j}" for j in range(law.k)] + ["cdf"])
    rows = []
    for t in cfg["points"]:
        t = np.asarray(t, float)
        if t.shape != (law.k,):
            raise ConfigError(f"cdf point {t.tolist()} has wrong dimension")
        if method == "mc":
            val, _ = law.cdf(t, method="mc",
                             n_mc=int(cfg.get("n_draws", 100000)),
                             seed=seed)
        else:
            val = law.cdf(t, method=method)
        rows.append(list(map(float, t)) + [float(val)])
    return ResultTable(columns, rows)


def cmd_sample(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("representation", "n_draws", "design", "beta",
                        "limit", "gamma", "sigma", "alpha"),
                  ("representation", "n_draws", "sigma", "alpha"), "sample")
    rep = cfg["representation"]
    n_draws = int(cfg["n_draws"])
    sigma, alpha = float(cfg["sigma"]), float(cfg["alpha"])
    acfg = AveragingConfig(alpha=alpha, sigma=sigma)
    if rep == "ASYMPTOTIC":
        limit = _parse_limit(cfg["limit"])
        batch = sample_asymptotic(limit, _parse_gamma(cfg["gamma"]),
                                  sigma, alpha, n_draws, seed)
    elif rep in ("DATA_LEVEL", "ROOT_REP", "CHI_REP"):
        design = _parse_design(cfg["design"])
        if rep == "CHI_REP":
            beta2 = None
            if "beta" in cfg:
                beta2 = np.asarray(cfg["beta"], float)[design.k1:]
            batch = sample_chi_rep(design, acfg, n_draws, seed, beta2=beta2)
        else:
            beta = np.asarray(cfg["beta"], float)
            fn = sample_data_level if rep == "DATA_LEVEL" else sample_root_rep
            batch = fn(design, beta, acfg, n_draws, seed)
    else:
        raise ConfigError(f"unknown representation {rep!r}")
    k = batch.draws.shape[1]
    columns = tuple(f"t_{j}" for j in range(k))
    rows = [list(map(float, d)) for d in batch.draws]
    meta = {"representation": rep, "draw_seed": batch.seed}
    meta.update({key: val for key, val in batch.extra.items()})
    return ResultTable(columns, rows, meta)


def cmd_l1_ladder(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("q", "k1", "orth_seed", "n_ladder", "path",
                        "sigma", "alpha", "resolution"),
                  ("q", "k1", "n_ladder", "path", "sigma", "alpha"),
                  "l1-ladder")
    q = np.asarray(cfg["q"], float)
    k1 = int(cfg["k1"])
    orth_seed = int(cfg.get("orth_seed", 0))
    pcfg = cfg["path"]
    _require_keys(pcfg, ("kind", "beta", "delta"), ("kind", "beta"), "path")
    beta = np.asarray(pcfg["beta"], float)
    if pcfg["kind"] == "fixed":
        path = ParameterPath.fixed(beta)
    elif pcfg["kind"] == "local":
        path = ParameterPath.local(beta, np.asarray(pcfg["delta"], float))
    else:
        raise ConfigError("path.kind must be 'fixed' or 'local'")

    def rule(n):
        return exact_gram_design(n, q, k1, orth_seed)

    spec = LadderSpec(n_ladder=tuple(int(n) for n in cfg["n_ladder"]),
                      path=path, design_rule=rule)
    return l1_ladder(spec, float(cfg["sigma"]), float(cfg["alpha"]),
                     resolution=int(cfg.get("resolution", 301)))


def cmd_oscillation(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("limit", "sigma", "alpha", "t", "gamma"),
                  ("limit", "sigma", "alpha", "t", "gamma"), "oscillation")
    limit = _parse_limit(cfg["limit"])
    if limit.k2 != 1:
        raise ConfigError("oscillation scan requires k2 = 1")
    sigma, alpha = float(cfg["sigma"]), float(cfg["alpha"])
    t = np.asarray(cfg["t"], float)
    grid = _grid_axis(cfg["gamma"], "gamma")
    if not np.any(grid == 0.0):
        grid = np.sort(np.append(grid, 0.0))
    gammas = [np.array([gm]) for gm in grid]
    law_vals = [AsymptoticLaw(limit, gm, sigma, alpha).cdf(t) for gm in gammas]
    half, _ = oscillation(limit, sigma, alpha, t, gammas)
    rows = [[float(gm), float(v)] for gm, v in zip(grid, law_vals)]
    return ResultTable(("gamma", "cdf"), rows,
                       {"delta_star_half": float(half),
                        "t": ",".join(format(v, ".17g") for v in t)})


def cmd_impossibility(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("q", "k1", "orth_seed", "beta", "sigma", "alpha", "t",
                        "n_ladder", "n_rep", "n_theta"),
                  ("q", "k1", "beta", "sigma", "alpha", "t", "n_ladder",
                   "n_rep"), "impossibility")
    q = np.asarray(cfg["q"], float)
    k1 = int(cfg["k1"])
    orth_seed = int(cfg.get("orth_seed", 0))
    sigma, alpha = float(cfg["sigma"]), float(cfg["alpha"])
    t = np.asarray(cfg["t"], float)
    limit = LimitDesign.from_q(q, k1)
    rho0, delta0, half = choose_radius_and_delta(limit, sigma, alpha, t)

    def rule(n):
        return exact_gram_design(n, q, k1, orth_seed)

    table = non_uniformity_experiment(
        rule, np.asarray(cfg["beta"], float), sigma, alpha, rho0, delta0, t,
        [int(n) for n in cfg["n_ladder"]], int(cfg["n_rep"]), seed,
        n_theta=int(cfg.get("n_theta", 21)))
    table.meta["half_oscillation"] = float(half)
    return table


def cmd_check_transform(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("alphas", "sigmas", "k2s", "n_zeta"), (),
                  "check-transform")
    alphas = [float(v) for v in cfg.get("alphas", (0.5, 1.0, 2.0))]
    sigmas = [float(v) for v in cfg.get("sigmas", (0.5, 1.0, 2.0))]
    k2s = [int(v) for v in cfg.get("k2s", (1, 2))]
    zeta = np.logspace(-6, 2, int(cfg.get("n_zeta", 1000)))
    rows = []
    for alpha in alphas:
        for sigma in sigmas:
            for k2 in k2s:
                smap = ShrinkMap.from_tuning(alpha, sigma, k2)
                gz = g(smap, zeta)
                inv_err = float(np.max(np.abs(h(smap, gz) - zeta)
                                       / np.maximum(1.0, zeta)))
                # strict expansion is only representable while a*exp(-z^2/b)
                # stays above machine epsilon; beyond that require equality
                representable = zeta * zeta / smap.b - smap.log_a <= 36.0
                expanding = bool(np.all(gz >= zeta)
                                 and np.all(gz[representable]
                                            > zeta[representable]))
                x = np.full(smap.m, 0.7)
                jac = jacobian_det(smap, x)
                fd = _fd_jacobian_det(smap, x)
                jac_err = abs(jac - fd) / abs(fd)
                factor_err = abs(
                    log_density_factor(smap, h(smap, float(np.linalg.norm(x))))
                    + np.log(jac))
                ok = (inv_err <= 1e-12 and expanding and jac_err <= 1e-6
                      and factor_err <= 1e-10)
                rows.append([alpha, sigma, k2, inv_err, int(expanding),
                             float(jac_err), float(factor_err), bool(ok)])
    return ResultTable(("alpha", "sigma", "k2", "inverse_err", "expanding",
                        "jacobian_err", "factor_err", "ok"), rows)


def _fd_jacobian_det(smap: ShrinkMap, x: np.ndarray, step: float = 1e-6):
    from .shrink import forward

    m = x.size
    jac = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = step
        jac[:, j] = (forward(smap, x + e) - forward(smap, x - e)) / (2 * step)
    return float(np.linalg.det(jac))


def cmd_consistency_sweep(cfg: dict, seed: int) -> ResultTable:
    _require_keys(cfg, ("q", "k1", "orth_seed", "sigma", "alpha", "m_grid",
                        "beta_grid", "n_ladder", "n_rep"),
                  ("q", "k1", "sigma", "alpha", "m_grid", "beta_grid",
                   "n_ladder", "n_rep"), "consistency-sweep")
    q = np.asarray(cfg["q"], float)
    k1 = int(cfg["k1"])
    orth_seed = int(cfg.get("orth_seed", 0))

    def rule(n):
        return exact_gram_design(n, q, k1, orth_seed)

    return consistency_sweep(
        rule, float(cfg["sigma"]), float(cfg["alpha"]),
        [float(m) for m in cfg["m_grid"]],
        [np.asarray(b, float) for b in cfg["beta_grid"]],
        [int(n) for n in cfg["n_ladder"]], int(cfg["n_rep"]), seed)


_COMMANDS = {
    "estimate": cmd_estimate,
    "density": cmd_density,
    "cdf": cmd_cdf,
    "sample": cmd_sample,
    "l1-ladder": cmd_l1_ladder,
    "oscillation": cmd_oscillation,
    "impossibility": cmd_impossibility,
    "check-transform": cmd_check_transform,
    "consistency-sweep": cmd_consistency_sweep,
}


def _scipy_version() -> str:
    import scipy

    return scipy.__version__


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelavg",
        description="Model-averaging estimator experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "check-transform"),
                       help="YAML experiment config")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (U64)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker count (outputs are worker-invariant)")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.seed < 0:
        print("error: --seed must be a nonnegative integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _load_config(args.config) if args.config else {}
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out_dir = (args.out or os.environ.get("MODELAVG_OUT")
               or cfg.pop("out_dir", None) or ".")
    seed = args.seed
    started = time.time()
    try:
        table = _COMMANDS[args.command](cfg, seed)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.time() - started

    digest = config_hash({"command": args.command, "config": cfg,
                          "seed": seed})
    table.meta.setdefault("config_hash", digest)
    table.meta.setdefault("seed", seed)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{args.command}.csv")
    table.to_csv(csv_path, version=__version__)

    manifest = {
        "command": args.command,
        "config_hash": digest,
        "seed": seed,
        "workers": args.workers,
        "versions": {
            "modelavg": __version__,
            "numpy": np.__version__,
            "scipy": _scipy_version(),
            "python": sys.version.split()[0],
        },
        "wall_time_seconds": wall,
        "outputs": [os.path.basename(csv_path)],
    }
    with open(os.path.join(out_dir, f"{args.command}_manifest.json"),
              "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if args.command == "check-transform":
        ok_col = table.column("ok")
        for row in table.rows:
            status = "pass" if row[-1] else "FAIL"
            print(f"alpha={row[0]:g} sigma={row[1]:g} k2={row[2]} {status}")
        if not all(ok_col):
            return EXIT_NUMERIC
    print(f"wrote {csv_path}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
