"""Command-line entry point: ``capstab <subcommand>``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage error, 3 numerical
failure (solver breakdown, failed construction).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import conformal_metric as cm
from . import estimates as es
from . import geodesy, gh, revolution
from .liouville import SolverError, solve_comparison, verify_robin
from .model_cap import CapParams, model_factor
from .polar_grid import GridField, PolarGrid

log = logging.getLogger("capstab")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
CSV_SCHEMA = 1
RUNTIME_COLUMNS = ("runtime_s",)
SWEEP_COLUMNS = (
    "schema_version", "eta", "epsilon", "boundary_length", "area", "inradius",
    "robin_margin", "flux", "prop31_l1_p1", "prop31_l1_p15", "prop31_l2_p1",
    "prop31_l2_p15", "gh_upper", "gh_lower", "gh_upper_conformal", "status", "runtime_s",
)


class UsageError(ValueError):
    pass


@dataclass
class SweepConfig:
    c: float = 1.0
    eta_list: list = field(default_factory=lambda: [0.5, 0.2, 0.1, 0.05, 0.02, 0.01])
    grid: int = 128
    lambdas: list = field(default_factory=lambda: [1.0, 2.0])
    ps: list = field(default_factory=lambda: [1.0, 1.5])
    sample_size: int = 256
    out: str = "sweep.csv"
    tol_scale: float = 1.0
    seed: int = 0

    def validate(self) -> "SweepConfig":
        if not self.eta_list or not self.lambdas or not self.ps:
            raise UsageError("eta_list, lambdas and ps must be non-empty")
        etas = [float(e) for e in self.eta_list]
        if any(e <= 0 for e in etas) or any(b >= a for a, b in zip(etas, etas[1:])):
            raise UsageError("eta_list must be positive and strictly decreasing")
        if self.c <= 0:
            raise UsageError("c must be > 0")
        if self.grid < 8 or self.sample_size < 2:
            raise UsageError("grid must be >= 8 and sample_size >= 2")
        return self

    @classmethod
    def from_file(cls, path: str) -> "SweepConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()


def make_grid(n: int) -> PolarGrid:
    if n < 8:
        raise UsageError(f"grid must be >= 8, got {n}")
    return PolarGrid(n, n + (n % 2))


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def verify_model_report(c: float, n: int, tol_scale: float = 1.0) -> dict:
    """Closed-form identities of the model cap on an ``n x n`` grid."""
    grid = make_grid(n)
    u = cm.ConformalFactor(model_factor(c, grid), c, label="model")
    params = CapParams.from_c(c)
    h2 = grid.h**2 * tol_scale
    K = cm.gaussian_curvature(u).values[:-1]
    kappa = cm.boundary_curvature(u)
    L, A = cm.boundary_length(u), cm.area(u)
    checks = {
        "boundary_length": abs(L / params.boundary_length - 1) <= 1e-3 * tol_scale,
        "area": abs(A / params.area - 1) <= 1e-3 * tol_scale,
        "gaussian_curvature": float(np.abs(K - 1).max()) <= 10 * h2,
        "boundary_curvature": float(np.abs(kappa - c).max()) <= 10 * h2,
        "gauss_bonnet": cm.gauss_bonnet_residual(u) <= 10 * h2 * 2 * math.pi,
    }
    return {
        "c": c, "grid": n, "h": grid.h, "params": asdict(params),
        "boundary_length": L, "area": A,
        "max_K_error": float(np.abs(K - 1).max()),
        "max_kappa_error": float(np.abs(kappa - c).max()),
        "gauss_bonnet_residual": cm.gauss_bonnet_residual(u),
        "checks": checks, "passed": all(checks.values()),
    }


def cmd_verify_model(args) -> int:
    if args.c < 0:
        raise UsageError("c must be >= 0")
    rep = verify_model_report(args.c, args.grid, args.tol_scale)
    _emit(rep, args.out)
    failed = [k for k, ok in rep["checks"].items() if not ok]
    if failed:
        log.error("check failed: %s", failed[0])
        return EXIT_CHECK
    return EXIT_OK


def cmd_solve(args) -> int:
    if args.c <= 0 or args.eta < 0:
        raise UsageError("need c > 0 and eta >= 0")
    grid = make_grid(args.grid)
    u = cm.eta_family(args.c, args.eta, grid)
    sol = solve_comparison(u)
    robin = verify_robin(sol, u)
    rep = {"c": args.c, "eta": args.eta, "grid": args.grid, **sol.to_dict(robin.robin_margin),
           "max_dn_w": robin.max_dn_w, "boundary_length": cm.boundary_length(sol.v)}
    _emit(rep, args.out)
    if getattr(args, "sample_out", None):
        if args.align_to:
            ref = gh.MetricSample.from_json(Path(args.align_to).read_text())
            if ref.indices is None:
                raise UsageError(f"{args.align_to} carries no node indices")
            sample = gh.sample_at(sol.v, ref.indices)
        else:
            sample = gh.farthest_point_sample(sol.v, args.samples)
        Path(args.sample_out).write_text(sample.to_json())
    return EXIT_OK if sol.ordering_margin >= -1e-12 else EXIT_CHECK


def sweep_row(cfg: SweepConfig, eta: float, model=None, grid=None) -> dict:
    """One row of the stability sweep; solver failures land in ``status``."""
    t0 = time.perf_counter()
    grid = grid or make_grid(cfg.grid)
    row = {k: "" for k in SWEEP_COLUMNS}
    row.update(schema_version=CSV_SCHEMA, eta=eta, epsilon=cm.epsilon_of_eta(cfg.c, eta))
    try:
        u = cm.eta_family(cfg.c, eta, grid)
        sol = solve_comparison(u)
        rep = es.w_report(u, sol, cfg.lambdas, cfg.ps)
        model = model or cm.ConformalFactor(model_factor(cfg.c, grid), cfg.c, "model")
        a, b = gh.aligned_samples(sol.v, model, min(cfg.sample_size, grid.size))
        diam_b = b.diameter + 2 * b.covering_radius
        row.update(
            boundary_length=cm.boundary_length(u), area=cm.area(u),
            inradius=geodesy.inradius(sol.v)[0],
            robin_margin=verify_robin(sol, u).robin_margin,
            flux=rep.boundary_flux,
            prop31_l1_p1=rep.prop31.get((1.0, 1.0), ""),
            prop31_l1_p15=rep.prop31.get((1.0, 1.5), ""),
            prop31_l2_p1=rep.prop31.get((2.0, 1.0), ""),
            prop31_l2_p15=rep.prop31.get((2.0, 1.5), ""),
            gh_upper=gh.gh_upper_identity(a, b), gh_lower=gh.gh_lower(a, b),
            gh_upper_conformal=gh.gh_upper_conformal(sol.v, model, diam_b),
            status="ok",
        )
    except (SolverError, ValueError) as exc:
        log.warning("eta=%g failed: %s", eta, exc)
        row["status"] = f"error: {exc}"
    row["runtime_s"] = round(time.perf_counter() - t0, 3)
    return row


def run_sweep(cfg: SweepConfig) -> list[dict]:
    grid = make_grid(cfg.grid)
    model = cm.ConformalFactor(model_factor(cfg.c, grid), cfg.c, "model")
    return [sweep_row(cfg, float(eta), model, grid) for eta in cfg.eta_list]


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def cmd_stability_sweep(args) -> int:
    cfg = SweepConfig.from_file(args.config) if args.config else SweepConfig()
    overrides = {k: getattr(args, k) for k in ("c", "grid", "out", "seed", "tol_scale")
                 if getattr(args, k, None) is not None}
    if args.eta:
        overrides["eta_list"] = args.eta
    cfg = SweepConfig(**{**asdict(cfg), **overrides}).validate()
    rows = run_sweep(cfg)
    write_csv(rows, cfg.out)
    log.info("wrote %d rows to %s", len(rows), cfg.out)
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_NUMERIC


def counterexample_report(k: int, s: float, m: int = 128, nr: int = 160) -> dict:
    w = revolution.build_smoothed_football(k, s)
    round_w = revolution.WarpProfile.from_function(np.sin, math.pi)
    a = revolution.geodesic_sample(w, m, nr)
    b = revolution.geodesic_sample(round_w, m, nr)
    k_min = revolution.exact_min_curvature(w)
    length = revolution.closed_geodesic_length(w, "meridian")
    lower = gh.gh_lower(a, b)
    checks = {"curvature_at_least_one": k_min >= 1 - 1e-9,
              "long_closed_geodesic": length >= 2 * math.pi - 0.05,
              "gh_separated": lower >= 0.1}
    return {"k": k, "s": s, "rescale_factor": w.rescale_factor, "r_max": w.r_max,
            "min_K": k_min, "closed_geodesic_length": length,
            "equator_length": revolution.closed_geodesic_length(w, "parallel"),
            "gh_lower_vs_round": lower, "checks": checks, "passed": all(checks.values())}


def cmd_counterexample(args) -> int:
    try:
        rep = counterexample_report(args.k, args.s, args.samples)
    except revolution.MatchingError as exc:
        log.error("construction failed: %s", exc)
        return EXIT_USAGE
    _emit(rep, args.out)
    return EXIT_OK if rep["passed"] else EXIT_CHECK


def cmd_gh(args) -> int:
    try:
        a = gh.MetricSample.from_json(Path(args.a).read_text())
        b = gh.MetricSample.from_json(Path(args.b).read_text())
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read samples: {exc}") from exc
    if args.aligned and a.n != b.n:
        raise UsageError(f"aligned comparison needs equal sizes, got {a.n} and {b.n}")
    if (args.aligned and a.indices is not None and b.indices is not None
            and not np.array_equal(a.indices, b.indices)):
        raise UsageError("aligned comparison needs samples taken at the same nodes")
    upper = gh.gh_upper_identity(a, b) if args.aligned else gh.gh_upper_trivial(a, b)
    rep = {"upper": upper, "lower": gh.gh_lower(a, b), "aligned": args.aligned}
    if max(a.n, b.n) <= gh.MAX_EXACT:
        rep["exact"] = gh.gh_exact_small(a, b)
    _emit(rep, args.out)
    return EXIT_OK if rep["lower"] <= rep["upper"] + 1e-12 else EXIT_CHECK


def estimates_report(c: float, eta: float, n: int, seed: int = 0, tol_scale: float = 1.0) -> dict:
    grid = make_grid(n)
    u = cm.eta_family(c, eta, grid)
    sol = solve_comparison(u)
    rep = es.w_report(u, sol)
    h2 = grid.h**2 * tol_scale
    lemma = rep.lemma_checks(10 * h2, 10 * h2 * float(np.exp(2 * u.values).max()))
    f = GridField(grid, np.vstack([-es.pg.laplacian(rep.w).values[:-1],
                                   np.zeros((1, grid.ntheta))]))
    rng = np.random.default_rng(seed)
    bm = {}
    for delta in (math.pi, 2 * math.pi, 3 * math.pi):
        res = es.brezis_merle_check(f, delta)
        bm[f"{delta:.6f}"] = {"lhs": res.lhs, "rhs": res.rhs, "holds": res.holds}
    cx, cy = rng.uniform(-0.5, 0.5, 2)
    bump = GridField(grid, np.exp(-((grid.x - cx) ** 2 + (grid.y - cy) ** 2) / 0.01))
    checks = {**lemma,
              "flux_identity": abs(rep.l1_laplacian - abs(rep.boundary_flux)) <= 10 * h2,
              "brezis_merle": all(v["holds"] for v in bm.values()),
              "exp_bracket": all(math.pi - 0.01 <= v <= 4 * math.pi + 0.1
                                 for v in rep.exp_integrals.values())}
    return {"c": c, "eta": eta, "grid": n, "report": rep.to_dict(), "brezis_merle": bm,
            "green_ratio_bump_p1": es.green_ratio(bump, 1.0),
            "checks": {k: bool(v) for k, v in checks.items()},
            "passed": bool(all(checks.values()))}


def cmd_estimates(args) -> int:
    if args.c <= 0 or args.eta < 0:
        raise UsageError("need c > 0 and eta >= 0")
    rep = estimates_report(args.c, args.eta, args.grid, args.seed, args.tol_scale)
    _emit(rep, args.out)
    return EXIT_OK if rep["passed"] else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capstab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, c=1.0, grid=128, eta=None):
        sp.add_argument("--c", type=float, default=c)
        sp.add_argument("--grid", type=int, default=grid)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol-scale", dest="tol_scale", type=float, default=1.0)
        if eta is not None:
            sp.add_argument("--eta", type=float, default=eta)

    sp = sub.add_parser("verify-model", help="closed-form identities of the model cap")
    common(sp, grid=256)
    sp.set_defaults(func=cmd_verify_model)

    sp = sub.add_parser("solve", help="comparison solve for one eta-family member")
    common(sp, eta=0.1)
    sp.add_argument("--sample-out", dest="sample_out", default=None,
                    help="also write a farthest-point MetricSample of v as JSON")
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--align-to", dest="align_to", default=None,
                    help="sample at the nodes of this MetricSample file instead")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("stability-sweep", help="CSV sweep over eta")
    sp.add_argument("--config", default=None, help="flat JSON SweepConfig")
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--grid", type=int, default=None)
    sp.add_argument("--eta", type=float, nargs="+", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--tol-scale", dest="tol_scale", type=float, default=None)
    sp.set_defaults(func=cmd_stability_sweep)

    sp = sub.add_parser("counterexample", help="smoothed football versus the round sphere")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--s", type=float, default=0.1)
    sp.add_argument("--samples", type=int, default=128)
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("gh", help="GH bounds between two MetricSample JSON files")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--aligned", action="store_true")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_gh)

    sp = sub.add_parser("estimates", help="integral estimates for one eta-family member")
    common(sp, eta=0.1)
    sp.set_defaults(func=cmd_estimates)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"capstab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, cm.AdmissibilityError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
