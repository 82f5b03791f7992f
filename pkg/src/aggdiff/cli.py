"""Config-driven experiment runner and command-line entry points.

Subcommands: ``run <config>``, ``sweep <config> --param <name> --values
<list>``, ``steady``, ``toy``, ``validate <config>``.  Configs are TOML; the
``presets/`` directory in the repository ships ready-made campaign files.
Sweeps fan out over a process pool capped by the AGGDIFF_THREADS env var.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from . import density, diagnostics, fv, io_csv, kernels, particles, toy


@dataclass(frozen=True)
class ExperimentConfig:
    initial: density.InitialDatumSpec
    epsilon: float
    t_end: float
    solver: str = "fv"
    kernel_name: str = "gaussian"
    kernel_params: dict = field(default_factory=dict)
    domain: Tuple[float, float] = (-2.0, 2.0)
    dx: float = 0.01
    N: int = 400
    snapshot_times: Tuple[float, ...] = ()
    diagnostics_dt: Optional[float] = None
    reference: str = "none"
    output_dir: str = "out"
    seed_label: str = ""
    tol_abs: float = 1e-6
    tol_rel: float = 1e-6


def build_kernel(config: ExperimentConfig):
    if config.kernel_name == "gaussian":
        return kernels.gaussian(**config.kernel_params)
    raise ValueError(f"unknown kernel: {config.kernel_name!r}")


def _initial_from_table(table: dict) -> density.InitialDatumSpec:
    profile = table.get("profile")
    center = float(table.get("center", 0.0))
    if profile == "parabola":
        return density.Parabola(float(table["a"]), float(table["b"]), center)
    if profile == "uniform_box":
        return density.UniformBox(float(table["R"]), center)
    if profile == "oscillating_gaussian":
        return density.OscillatingGaussian(float(table["delta"]), center)
    raise ValueError(f"unknown initial profile: {profile!r}")


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    grid = doc.get("grid", {})
    part = doc.get("particles", {})
    kern = doc.get("kernel", {})
    kernel_params = {k: v for k, v in kern.items() if k != "name"}
    return ExperimentConfig(
        initial=_initial_from_table(doc.get("initial", {})),
        epsilon=float(doc["epsilon"]),
        t_end=float(doc["t_end"]),
        solver=doc.get("solver", "fv"),
        kernel_name=kern.get("name", "gaussian"),
        kernel_params=kernel_params,
        domain=tuple(float(v) for v in grid.get("domain", (-2.0, 2.0))),
        dx=float(grid.get("dx", 0.01)),
        N=int(part.get("N", 400)),
        snapshot_times=tuple(float(v) for v in doc.get("snapshot_times", ())),
        diagnostics_dt=(
            float(doc["diagnostics_dt"]) if "diagnostics_dt" in doc else None
        ),
        reference=doc.get("reference", "none"),
        output_dir=doc.get("output_dir", "out"),
        seed_label=doc.get("seed_label", ""),
        tol_abs=float(part.get("tol_abs", 1e-6)),
        tol_rel=float(part.get("tol_rel", 1e-6)),
    )


def validate_config(config: ExperimentConfig) -> List[str]:
    """Static checks; returns human-readable violations naming the field."""
    bad = []
    if config.solver not in ("fv", "particles", "both"):
        bad.append(f"solver: must be fv|particles|both, got {config.solver!r}")
    if config.epsilon < 0.0:
        bad.append(f"epsilon: must be nonnegative, got {config.epsilon}")
    if config.dx <= 0.0:
        bad.append(f"grid.dx: must be positive, got {config.dx}")
    if config.t_end <= 0.0:
        bad.append(f"t_end: must be positive, got {config.t_end}")
    lo, hi = config.domain
    if hi <= lo:
        bad.append(f"grid.domain: empty interval {config.domain}")
    elif config.dx > 0.0:
        span = hi - lo
        n = round(span / config.dx)
        if n < 1 or abs(n * config.dx - span) > 1e-9 * max(1.0, span):
            bad.append(f"grid.dx: {config.dx} does not evenly divide domain {config.domain}")
    if config.solver in ("particles", "both") and config.N < 2:
        bad.append(f"particles.N: must be at least 2, got {config.N}")
    for t in config.snapshot_times:
        if t < 0.0 or t > config.t_end + 1e-12:
            bad.append(f"snapshot_times: {t} outside [0, t_end={config.t_end}]")
    supp = config.initial.support()
    if supp is not None and (supp[0] < lo - 1e-12 or supp[1] > hi + 1e-12):
        bad.append(
            f"grid.domain: does not contain the initial support "
            f"[{supp[0]:.4g}, {supp[1]:.4g}]"
        )
    if config.reference not in ("none", "computed_steady_state"):
        bad.append(f"reference: must be none|computed_steady_state, got {config.reference!r}")
    if config.diagnostics_dt is not None and config.diagnostics_dt <= 0.0:
        bad.append(f"diagnostics_dt: must be positive, got {config.diagnostics_dt}")
    return bad


def _particle_diag_rows(snaps, kernel, config, ref) -> List[diagnostics.DiagnosticsRow]:
    lo, hi = config.domain
    n = round((hi - lo) / config.dx)
    rows = []
    for ens in snaps:
        grid = particles.resample_to_grid(ens, lo, config.dx, n)
        w2 = particles.wasserstein_to_grid(ens, ref, 2) if ref is not None else None
        rows.append(
            diagnostics.DiagnosticsRow(
                t=ens.time,
                mass=density.mass(grid),
                linf=density.linf_norm(grid),
                l2sq=density.l2_norm_sq(grid),
                m2=ens.second_moment(),
                energy=diagnostics.energy(grid, kernel, config.epsilon),
                dissipation=diagnostics.dissipation(grid, kernel, config.epsilon),
                w2_to_ref=w2,
            )
        )
    return rows


def run_experiment(config: ExperimentConfig) -> Tuple[int, dict]:
    """Execute one campaign; returns (exit_status, summary dict).

    Artifacts land in config.output_dir: per-time snapshot CSVs, a
    diagnostics CSV, the computed reference steady state (when requested)
    with its sidecar metadata, a particle trajectory CSV, a cross-solver
    distance series for solver=both, and a one-row summary.csv.
    """
    violations = validate_config(config)
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2, {}

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kernel = build_kernel(config)
    rho0 = density.build_initial(config.initial, config.domain, config.dx)

    summary: dict = {
        "seed_label": config.seed_label,
        "solver": config.solver,
        "epsilon": config.epsilon,
        "initial_linf": density.linf_norm(rho0),
        "initial_m2": density.moment(rho0, 2),
    }

    ref = None
    if config.reference == "computed_steady_state":
        steady = diagnostics.compute_steady_state(
            kernel,
            config.epsilon,
            center=density.center_of_mass(rho0),
            domain=config.domain,
            dx=config.dx,
        )
        io_csv.write_density_csv(out / "steady.csv", steady.density)
        io_csv.write_steady_meta_csv(out / "meta.csv", config.epsilon, steady)
        if not steady.is_zero:
            ref = steady.density
            report = diagnostics.stability_hypotheses_check(rho0, steady, kernel)
            summary["hypothesis_support"] = (
                "satisfied" if report.condition_support_ok else "violated"
            )
            summary["hypothesis_distance"] = (
                "satisfied" if report.condition_distance_ok else "violated"
            )
            (out / "hypotheses.txt").write_text(report.summary() + "\n")

    snap_times = tuple(config.snapshot_times)
    diag_rows: List[diagnostics.DiagnosticsRow] = []

    try:
        if config.solver in ("fv", "both"):
            fv_config = fv.FvConfig(
                epsilon=config.epsilon, t_end=config.t_end, snapshot_times=snap_times
            )
            fv_result = fv.run(
                rho0,
                kernel,
                fv_config,
                reference=ref,
                diagnostics_dt=config.diagnostics_dt,
            )
            for state in fv_result.snapshots:
                io_csv.write_density_csv(
                    out / io_csv.snapshot_filename(state.time), state.density
                )
            io_csv.write_density_csv(out / "final.csv", fv_result.final.density)
            diag_rows = fv_result.diagnostics
            final_density = fv_result.final.density
            summary["final_linf"] = density.linf_norm(final_density)
            summary["final_m2"] = density.moment(final_density, 2)
            summary["final_w2_to_ref"] = (
                density.wasserstein_p(final_density, ref, 2) if ref is not None else None
            )

        if config.solver in ("particles", "both"):
            times = sorted(set(snap_times) | {config.t_end})
            particle_result = particles.run_particles(
                rho0,
                config.N,
                kernel,
                config.epsilon,
                config.t_end,
                snapshot_times=times,
                tol_abs=config.tol_abs,
                tol_rel=config.tol_rel,
            )
            snaps = [particles.init_particles(rho0, config.N)] + particle_result.snapshots
            io_csv.write_trajectory_csv(
                out / "trajectory.csv",
                [e.time for e in snaps],
                [e.positions for e in snaps],
            )
            lo, hi = config.domain
            n = round((hi - lo) / config.dx)
            prefix = "particle_" if config.solver == "both" else ""
            for ens in snaps:
                io_csv.write_density_csv(
                    out / (prefix + io_csv.snapshot_filename(ens.time)),
                    particles.resample_to_grid(ens, lo, config.dx, n),
                )
            particle_rows = _particle_diag_rows(snaps, kernel, config, ref)
            if config.solver == "particles":
                diag_rows = particle_rows
                final_ens = particle_result.final
                final_density = particles.resample_to_grid(final_ens, lo, config.dx, n)
                summary["final_linf"] = density.linf_norm(final_density)
                summary["final_m2"] = final_ens.second_moment()
                summary["final_w2_to_ref"] = (
                    particles.wasserstein_to_grid(final_ens, ref, 2)
                    if ref is not None
                    else None
                )

        if config.solver == "both":
            by_time = {e.time: e for e in particle_result.snapshots}
            by_time[particle_result.final.time] = particle_result.final
            cross = []
            for state in fv_result.snapshots + [fv_result.final]:
                ens = by_time.get(state.time)
                if ens is not None:
                    cross.append(
                        (state.time, particles.wasserstein_to_grid(ens, state.density, 2))
                    )
            io_csv.write_series_csv(out / "cross_w2.csv", ["t", "w2"], cross)
            if cross:
                summary["final_cross_w2"] = cross[-1][1]
    except (fv.FvAbort, particles.ParticleCollision) as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 1, summary

    if diag_rows:
        io_csv.write_diagnostics_csv(out / "diagnostics.csv", diag_rows)
        decay = [(r.t, r.w2_to_ref) for r in diag_rows if r.w2_to_ref is not None]
        if len(decay) >= 5:
            try:
                rate, r2 = diagnostics.w2_decay_fit(decay)
                summary["decay_rate"] = rate
                summary["decay_r2"] = r2
            except ValueError:
                pass
        m2s = [r.m2 for r in diag_rows]
        summary["m2_increased"] = "yes" if m2s[-1] > m2s[0] else "no"

    io_csv.write_summary_csv(out / "summary.csv", summary)
    return 0, summary


# ---------------------------------------------------------------------------
# sweeps


def _apply_sweep_value(
    config: ExperimentConfig, param: str, value: float
) -> ExperimentConfig:
    tag = f"{param}={value:g}"
    outdir = str(Path(config.output_dir) / tag)
    if param == "epsilon":
        return replace(config, epsilon=value, output_dir=outdir)
    if param == "R":
        if not isinstance(config.initial, density.UniformBox):
            raise ValueError("sweeping R requires a uniform_box initial profile")
        return replace(
            config,
            initial=replace(config.initial, R=value),
            output_dir=outdir,
        )
    if param == "delta":
        if not isinstance(config.initial, density.OscillatingGaussian):
            raise ValueError("sweeping delta requires an oscillating_gaussian profile")
        return replace(
            config,
            initial=replace(config.initial, delta=value),
            output_dir=outdir,
        )
    raise ValueError(f"unknown sweep parameter: {param!r}")


def _classify(summary: dict) -> str:
    w2 = summary.get("final_w2_to_ref")
    if w2 is not None and w2 < 1e-3:
        return "steady"
    linf0 = summary.get("initial_linf")
    linf1 = summary.get("final_linf")
    if (
        linf0 is not None
        and linf1 is not None
        and linf1 < 0.1 * linf0
        and summary.get("m2_increased") == "yes"
    ):
        return "decaying"
    return "undetermined"


def _sweep_pde_worker(args) -> Tuple[float, str, dict]:
    config, param, value = args
    try:
        run_config = _apply_sweep_value(config, param, value)
        status, summary = run_experiment(run_config)
        if status != 0:
            return value, f"failed: exit status {status}", summary
        return value, _classify(summary), summary
    except Exception as exc:  # individual failures recorded, sweep continues
        return value, f"failed: {exc}", {}


def _sweep_toy_worker(args) -> Tuple[float, str, dict]:
    config, _, value = args
    try:
        kernel = build_kernel(config)
        problem = toy.ToyProblem(config.epsilon, kernel)
        label = toy.classify_basin(problem, value)
        traj = toy.integrate_toy(problem, value, config.t_end)
        return value, label, {"final_X": float(traj.X[-1])}
    except Exception as exc:
        return value, f"failed: {exc}", {}


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("AGGDIFF_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def sweep(config: ExperimentConfig, param: str, values: Sequence[float]) -> List[tuple]:
    """One run per value with a classification column; writes phase_table.csv."""
    if param not in ("epsilon", "R", "delta", "X0"):
        raise ValueError(f"unknown sweep parameter: {param!r}")
    worker = _sweep_toy_worker if param == "X0" else _sweep_pde_worker
    jobs = [(config, param, v) for v in values]
    if not jobs:
        results = []
    elif worker_count(len(jobs)) == 1:
        results = [worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=worker_count(len(jobs))) as pool:
            results = list(pool.map(worker, jobs))

    rows = []
    for value, label, summary in results:
        rows.append(
            (
                value,
                label,
                summary.get("final_linf"),
                summary.get("final_m2"),
                summary.get("final_w2_to_ref"),
                summary.get("final_X"),
            )
        )
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    io_csv.write_series_csv(
        out / "phase_table.csv",
        ["value", "classification", "final_linf", "final_m2", "final_w2_to_ref", "final_X"],
        rows,
    )
    return rows


# ---------------------------------------------------------------------------
# entry points


def _cmd_run(args) -> int:
    config = load_config(args.config)
    status, summary = run_experiment(config)
    if status == 0:
        pairs = ", ".join(f"{k}={v}" for k, v in summary.items() if v is not None)
        print(f"run complete: {pairs}")
    return status


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = sweep(config, args.param, values)
    for row in rows:
        print(f"{args.param}={row[0]:g}: {row[1]}")
    return 0


def _cmd_steady(args) -> int:
    kernel = kernels.gaussian()
    steady = diagnostics.compute_steady_state(
        kernel,
        args.epsilon,
        mass_target=args.mass,
        center=args.center,
        domain=tuple(args.domain),
        dx=args.dx,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io_csv.write_density_csv(out / "steady.csv", steady.density)
    io_csv.write_steady_meta_csv(out / "meta.csv", args.epsilon, steady)
    if steady.is_zero:
        print(f"epsilon={args.epsilon:g}: only the zero state is stationary")
    else:
        interval = steady.support_interval()
        print(
            f"epsilon={args.epsilon:g}: C={steady.lagrange_constant:.10g} "
            f"residual={steady.residual:.3e} support=[{interval[0]:.6g}, {interval[1]:.6g}]"
            + ("" if steady.converged else " (NOT converged)")
        )
    return 0 if (steady.converged or steady.is_zero) else 1


def _cmd_toy(args) -> int:
    kernel = kernels.gaussian()
    problem = toy.ToyProblem(args.epsilon, kernel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eq = toy.find_equilibria(problem)
    stable = [x for x, label in eq if label == "stable"]
    unstable = [x for x, label in eq if label == "unstable"]
    io_csv.write_series_csv(
        out / "equilibria.csv",
        ["epsilon", "a", "b", "fold"],
        [
            (
                args.epsilon,
                stable[0] if stable else None,
                unstable[0] if unstable else None,
                toy.fold_epsilon(kernel),
            )
        ],
    )
    if not eq:
        print(f"epsilon={args.epsilon:g}: no equilibria (beyond the fold)")
    else:
        desc = ", ".join(f"{label} at X={x:.8f}" for x, label in eq)
        print(f"epsilon={args.epsilon:g}: {desc}")
    if args.x0 is not None:
        traj = toy.integrate_toy(problem, args.x0, args.t_end)
        io_csv.write_series_csv(
            out / "trajectory.csv", ["t", "X"], zip(traj.t, traj.X)
        )
        label = toy.classify_basin(problem, args.x0)
        print(f"X0={args.x0:g}: {label}; X({args.t_end:g}) = {traj.X[-1]:.8f}")
    return 0


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    violations = validate_config(config)
    for v in violations:
        print(v)
    if not violations:
        print("config OK")
    return 2 if violations else 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="aggdiff",
        description="Finite-volume and particle experiments for a 1D "
        "nonlocal aggregation-diffusion equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one experiment config")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep", help="run a config across parameter values")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=["epsilon", "R", "delta", "X0"])
    p.add_argument("--values", required=True, help="comma-separated list")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("steady", help="compute a steady state")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--kernel", default="gaussian", choices=["gaussian"])
    p.add_argument("--dx", type=float, default=0.005)
    p.add_argument("--domain", type=float, nargs=2, default=[-2.0, 2.0])
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--out", default="steady_out")
    p.set_defaults(fn=_cmd_steady)

    p = sub.add_parser("toy", help="two-particle model: equilibria and trajectories")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--t-end", type=float, default=500.0)
    p.add_argument("--out", default="toy_out")
    p.set_defaults(fn=_cmd_toy)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
