"""Command-line front end: fit, simulate, benchmark, plot-data extraction."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Dict, List, Optional, Tuple

import numpy as np

__all__ = ["main", "build_parser", "RunConfig"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_DEFAULT_CONFIG = {
    "n_basis": 6,
    "degree": 3,
    "K_grid": [2],
    "family_pairs": [["VG", "VG"]],
    "flm_variants": ["AkjBkQkDk"],
    "sigma_y_families": ["VVV"],
    "thresholds": [0.2],
    "common_psi_x": False,
    "common_psi_y": False,
    "n_starts": 1,
    "max_iter": 200,
    "tol": 1e-6,
    "init": "kmeans",
}


class RunConfig:
    """Validated fitting configuration assembled from JSON plus defaults."""

    def __init__(self, raw: Optional[dict] = None):
        from .model import FLM_VARIANTS, SIGMA_Y_FAMILIES

        merged = dict(_DEFAULT_CONFIG)
        if raw:
            unknown = set(raw) - set(_DEFAULT_CONFIG)
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            merged.update(raw)
        self.n_basis = merged["n_basis"]
        self.degree = int(merged["degree"])
        self.K_grid = [int(k) for k in merged["K_grid"]]
        self.family_pairs = [tuple(p) for p in merged["family_pairs"]]
        self.flm_variants = list(merged["flm_variants"])
        self.sigma_y_families = list(merged["sigma_y_families"])
        self.thresholds = [float(t) for t in merged["thresholds"]]
        self.common_psi_x = bool(merged["common_psi_x"])
        self.common_psi_y = bool(merged["common_psi_y"])
        self.n_starts = int(merged["n_starts"])
        self.max_iter = int(merged["max_iter"])
        self.tol = float(merged["tol"])
        self.init = merged["init"]
        for name, grid in [("K_grid", self.K_grid),
                           ("family_pairs", self.family_pairs),
                           ("flm_variants", self.flm_variants),
                           ("sigma_y_families", self.sigma_y_families),
                           ("thresholds", self.thresholds)]:
            if not grid:
                raise ValueError(f"config grid {name} must be nonempty")
        for v in self.flm_variants:
            if v not in FLM_VARIANTS:
                raise ValueError(f"unknown FLM variant {v!r}")
        for f in self.sigma_y_families:
            if f not in SIGMA_Y_FAMILIES:
                raise ValueError(f"unknown sigma_y family {f!r}")
        for fx, fy in self.family_pairs:
            for f in (fx, fy):
                if f.upper() not in ("VG", "ST", "NIG"):
                    raise ValueError(f"unknown skew family {f!r}")
        if any(k < 1 for k in self.K_grid):
            raise ValueError("K grid entries must be >= 1")
        if self.n_starts < 1 or self.max_iter < 1 or self.tol <= 0:
            raise ValueError("n_starts, max_iter must be >= 1 and tol > 0")

    def parsimony_configs(self):
        from .model import ParsimonyConfig
        return [ParsimonyConfig(flm_variant=v, sigma_y_family=f,
                                common_psi_x=self.common_psi_x,
                                common_psi_y=self.common_psi_y)
                for v in self.flm_variants for f in self.sigma_y_families]

    def basis_for(self, variable: str):
        from .funbasis import BSplineBasis
        n = self.n_basis
        if isinstance(n, dict):
            if variable not in n:
                raise ValueError(f"no basis size configured for variable {variable!r}")
            n = n[variable]
        return BSplineBasis.with_n_basis(int(n), degree=self.degree)


def _load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    return RunConfig(raw)


def _apply_threads(threads: Optional[int]) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ValueError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)


def cmd_fit(args) -> int:
    from .em import FitError, NumericalBreakdownError
    from .funbasis import fit_coefficients
    from .io import (CurveCsvError, read_curves_csv, result_to_json,
                     write_bic_table_csv, write_labels_csv)

    config = _load_config(args.config)
    curves = read_curves_csv(args.curves)
    bases_x = {v: config.basis_for(v) for v in curves.variables("X")}
    bases_y = {v: config.basis_for(v) for v in curves.variables("Y")}
    data = fit_coefficients(curves, bases_x, bases_y)
    from .em import select_model
    try:
        result = select_model(
            data, K_grid=config.K_grid, configs=config.parsimony_configs(),
            family_pairs=config.family_pairs, thresholds=config.thresholds,
            n_starts=config.n_starts, seed=args.seed, max_iter=config.max_iter,
            tol=config.tol, init=config.init, verbose=args.verbose)
    except (FitError, NumericalBreakdownError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "result.json"), "w", encoding="utf-8") as fh:
        fh.write(result_to_json(result, data))
    write_labels_csv(os.path.join(args.out_dir, "labels.csv"),
                     data.curve_ids, result.labels, result.t)
    write_bic_table_csv(os.path.join(args.out_dir, "bic_table.csv"),
                        result.bic_table)
    print(f"best BIC {result.bic:.4f} with K={result.model.K}; "
          f"outputs in {args.out_dir}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .funbasis import eval_basis
    from .io import write_curves_csv, write_truth_csv
    from .sim import builtin_scenario, simulate

    scenario = builtin_scenario(args.scenario, n=args.n)
    data, labels = simulate(scenario, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    # Re-render the smoothed curves to the long format for downstream fitting.
    grid = np.linspace(0.0, 1.0, 101)
    phi_x = eval_basis(data.bases_x[0], grid)
    phi_y = eval_basis(data.bases_y[0], grid)
    from .funbasis import CurveSet
    samples = {}
    for i, cid in enumerate(data.curve_ids):
        samples[(cid, "X1")] = (grid, phi_x @ data.c_x[i])
        samples[(cid, "Y1")] = (grid, phi_y @ data.c_y[i])
    curves = CurveSet(samples=samples, roles={"X1": "X", "Y1": "Y"})
    write_curves_csv(os.path.join(args.out_dir, "curves.csv"), curves)
    write_truth_csv(os.path.join(args.out_dir, "truth.csv"),
                    data.curve_ids, labels)
    print(f"wrote {len(data.curve_ids)} curves to {args.out_dir}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from .sim import benchmark, builtin_scenario

    scenario = builtin_scenario(args.scenario, n=args.n)
    summary = benchmark(scenario, n_reps=args.reps, seed=args.seed,
                        max_iter=args.max_iter)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "ari_summary.csv"), "w",
              newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "n_reps", "mean", "sd", "median"])
        writer.writerow([summary["scenario"], summary["n_reps"],
                         repr(summary["ari_mean"]), repr(summary["ari_sd"]),
                         repr(summary["ari_median"])])
    if "gamma_mse" in summary:
        with open(os.path.join(args.out_dir, "gamma_mse.csv"), "w",
                  newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cluster", "row", "col", "mse"])
            for k, mat in enumerate(summary["gamma_mse"]):
                for r in range(mat.shape[0]):
                    for c in range(mat.shape[1]):
                        writer.writerow([k, r, c, repr(float(mat[r, c]))])
    print(f"ARI mean {summary['ari_mean']:.4f} sd {summary['ari_sd']:.4f} "
          f"median {summary['ari_median']:.4f}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    from .funbasis import eval_basis
    from .io import result_from_json

    with open(args.result, encoding="utf-8") as fh:
        result, dataset = result_from_json(fh.read())
    if dataset is None:
        print("result.json carries no dataset context; refit with cmd fit",
              file=sys.stderr)
        return EXIT_INPUT
    K = result.model.K
    grid_n = args.grid
    grid = np.linspace(0.0, 1.0, grid_n)
    rows: List[List] = []
    for role, c_mat, bases in (("X", dataset["c_x"], dataset["bases_x"]),
                               ("Y", dataset["c_y"], dataset["bases_y"])):
        offset = 0
        for vi, basis in enumerate(bases):
            r = basis.n_basis
            coefs = c_mat[:, offset:offset + r]
            offset += r
            lo, hi = basis.domain
            tgrid = np.linspace(lo, hi, grid_n)
            phi = eval_basis(basis, tgrid)
            means = []
            for k in range(K):
                members = coefs[result.labels == k]
                if members.shape[0] == 0:
                    means.append(np.full(grid_n, np.nan))
                else:
                    means.append(phi @ members.mean(axis=0))
            for j, t in enumerate(tgrid):
                rows.append([f"{role}{vi}", repr(float(t))]
                            + [repr(float(means[k][j])) for k in range(K)])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "t"] + [f"cluster_{k}" for k in range(K)])
        writer.writerows(rows)
    print(f"wrote cluster mean curves to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funskewclust",
        description="Cluster paired functional data with skewed "
                    "functional-regression mixtures.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the mixture to a curve CSV")
    p_fit.add_argument("curves", help="long-format curves.csv")
    p_fit.add_argument("--config", default=None, help="JSON run configuration")
    p_fit.add_argument("--out-dir", default=".", help="output directory")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--verbose", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="generate a built-in scenario")
    p_sim.add_argument("--scenario", required=True,
                       choices=["NIG-VG", "NIG-NIG", "ST-ST", "VG-VG"])
    p_sim.add_argument("--n", type=int, default=600)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out-dir", default=".")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("benchmark", help="repeated simulate-and-fit scoring")
    p_bench.add_argument("--scenario", required=True,
                         choices=["NIG-VG", "NIG-NIG", "ST-ST", "VG-VG"])
    p_bench.add_argument("--reps", type=int, default=10)
    p_bench.add_argument("--n", type=int, default=600)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--max-iter", type=int, default=200)
    p_bench.add_argument("--out-dir", default=".")
    p_bench.set_defaults(func=cmd_benchmark)

    p_plot = sub.add_parser("plotdata", help="per-cluster mean curves as CSV")
    p_plot.add_argument("result", help="result.json from fit")
    p_plot.add_argument("--grid", type=int, default=101)
    p_plot.add_argument("--out", default="plotdata.csv")
    p_plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    from .em import EmptyClusterError, FitError, NumericalBreakdownError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError, FitError,
            EmptyClusterError, NumericalBreakdownError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
