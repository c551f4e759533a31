"""Command-line front end: simulate ensembles, run property checks, and
compare unravelings, writing delimited data, JSON summaries, and figures.

Exit codes: 0 success, 1 configuration error, 2 invalid unraveling
(negative rate / negative coefficient), 3 property check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .divisibility import (
    DivisibilityReport,
    check_cp_divisibility,
    check_dissipativity,
    check_p_divisibility,
)
from .errors import (
    NegativeCoefficient,
    NegativeRate,
    RoqjError,
    SchemaError,
)
from .linalg import PSD_TOL, _fix_phase, haar_state, projector
from .models import ModelSpec, integrate_master_equation, resolve_model
from .rate_ops import rate_operator_R, rate_operator_W
from .trajectory import (
    Ensemble,
    UnravelingSpec,
    bloch_vector,
    effective_ensemble_size,
    named_unraveling,
    run_ensemble,
    write_ensemble_csv,
    write_trajectories_jsonl,
)

log = logging.getLogger("roqj")

STATE_CHANGE_TOL = 1e-10
ASYMPTOTIC_JUMP_THRESHOLD = 0.01  # mean state-changing jumps per trajectory
POSTJUMP_CLUSTER_LIMIT = 3
SIZE_CAP = 60


@dataclass
class RunConfig:
    model: str
    unraveling: str
    n_traj: int = 10000
    dt: float = 0.002
    t_max: float = 5.0
    seed: int = 1
    workers: int = 1
    out: str = "roqj-out"

    def validate(self) -> None:
        if self.dt <= 0:
            raise SchemaError("--dt", "must be positive")
        if self.t_max <= 0:
            raise SchemaError("--tmax", "must be positive")
        if self.n_traj < 1:
            raise SchemaError("--ntraj", "must be at least 1")
        if self.workers < 1:
            raise SchemaError("--workers", "must be at least 1")

    def grid(self) -> np.ndarray:
        n = int(round(self.t_max / self.dt))
        return np.linspace(0.0, n * self.dt, n + 1)


def _time_expression(expr: str):
    """Compile a y(t)/x(t) expression with a restricted numeric namespace."""
    names = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log",
             "sqrt", "arctan", "arcsin", "arccos")
    space = {k: getattr(np, k) for k in names}
    space.update(pi=np.pi, e=np.e, abs=abs, min=min, max=max)
    try:
        code = compile(expr, "<expression>", "eval")
    except SyntaxError as exc:
        raise SchemaError("--unraveling", f"bad expression {expr!r}: {exc}") from None
    for name in code.co_names:
        if name != "t" and name not in space:
            raise SchemaError("--unraveling", f"name {name!r} not allowed in expression")
    return lambda t: float(eval(code, {"__builtins__": {}}, {**space, "t": t}))


def _build_unraveling(name: str, model: ModelSpec) -> UnravelingSpec:
    if name.startswith("fixed-postjump"):
        y = None
        if ":" in name:
            _, param = name.split(":", 1)
            if not param.startswith("y="):
                raise SchemaError("--unraveling", "expected fixed-postjump:y=<expr>")
            y = _time_expression(param[2:])
        return named_unraveling("fixed-postjump", model.representation, y=y)
    return named_unraveling(name, model.representation)


def _state_changing(ensemble: Ensemble) -> np.ndarray:
    if ensemble.jump_time.size == 0:
        return np.zeros(0, dtype=bool)
    ov = np.abs(np.einsum("mi,mi->m", ensemble.jump_pre.conj(), ensemble.jump_post)) ** 2
    return (1.0 - ov) > STATE_CHANGE_TOL


def _postjump_cluster_count(ensemble: Ensemble, tol: float = 1e-6,
                            cap: int = POSTJUMP_CLUSTER_LIMIT + 1) -> int:
    posts = ensemble.jump_post[:5000]
    reps: list[np.ndarray] = []
    for s in posts:
        s = _fix_phase(s)
        if reps:
            if np.max(np.abs(np.stack(reps) @ s.conj()) ** 2) >= 1.0 - tol:
                continue
        reps.append(s)
        if len(reps) >= cap:
            break
    return len(reps)


def ensemble_summary(ensemble: Ensemble, model: ModelSpec, config: RunConfig) -> dict:
    """Jump statistics, Table-style behavior flags, effective ensemble
    sizes, and deviation from the reference integrator."""
    grid = ensemble.t_grid
    window = 0.8 * grid[-1]
    changing = _state_changing(ensemble)
    late = ensemble.jump_time >= window
    late_changing = int(np.sum(changing & late))

    sizes = {}
    for idx in ensemble.snapshot_indices:
        t = float(grid[idx])
        n = effective_ensemble_size(ensemble, t, cluster_tol=1e-6, max_clusters=SIZE_CAP)
        sizes[f"{t:g}"] = n if n <= SIZE_CAP else f">{SIZE_CAP}"

    reference = integrate_master_equation(
        model.representation, projector(model.initial_state), grid)
    dev = np.abs(ensemble.mean_rho - reference)
    se = np.sqrt(ensemble.se_re ** 2 + ensemble.se_im ** 2)
    # the first-order stepper carries O(dt) discretization bias, which does
    # not shrink with the ensemble size; floor the denominator at dt so
    # entries with (near-)zero sampling variance are judged against that
    # bias scale instead of blowing up the ratio
    dt = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
    z = dev / np.maximum(se, dt)

    return {
        "model": model.name,
        "unraveling": ensemble.label,
        "n_traj": ensemble.n_traj,
        "dt": float(grid[1] - grid[0]),
        "t_max": float(grid[-1]),
        "master_seed": ensemble.master_seed,
        "total_jumps": int(ensemble.jump_time.size),
        "state_changing_jumps": int(np.sum(changing)),
        "jumps_in_final_20pct": int(np.sum(late)),
        "state_changing_jumps_in_final_20pct": late_changing,
        "asymptotic_jumps": bool(late_changing / ensemble.n_traj > ASYMPTOTIC_JUMP_THRESHOLD),
        "deterministic_changes": bool(ensemble.max_deterministic_drop > STATE_CHANGE_TOL),
        "time_independent_postjump_states": bool(
            _postjump_cluster_count(ensemble) <= POSTJUMP_CLUSTER_LIMIT),
        "effective_ensemble_sizes": sizes,
        "max_reference_deviation": float(np.max(dev)),
        "max_reference_deviation_in_se": float(np.max(z[1:])) if len(grid) > 1 else 0.0,
    }


def cmd_simulate(config: RunConfig) -> int:
    config.validate()
    model = resolve_model(config.model)
    spec = _build_unraveling(config.unraveling, model)
    grid = config.grid()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    log.info("simulating %s / %s: %d trajectories, dt=%g, t_max=%g",
             model.name, spec.label, config.n_traj, config.dt, config.t_max)
    ensemble = run_ensemble(spec, model.representation, model.initial_state,
                            grid, config.n_traj, config.seed,
                            workers=config.workers)

    write_ensemble_csv(ensemble, out / "ensemble.csv")
    write_trajectories_jsonl(ensemble, out / "trajectories.jsonl")
    summary = ensemble_summary(ensemble, model, config)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    from . import plots

    reference = integrate_master_equation(
        model.representation, projector(model.initial_state), grid)
    plots.plot_sample_trajectories(ensemble, out / "trajectories.png")
    plots.plot_final_states(ensemble, out / "final_states.png")
    plots.plot_mean_coherence(ensemble, out / "mean_coherence.png", reference=reference)
    print(f"wrote {out}/ensemble.csv, trajectories.jsonl, summary.json, figures")
    return 0


def _rate_positivity_report(model: ModelSpec, unraveling: str, samples: int,
                            t_max: float, seed: int = 0) -> DivisibilityReport:
    spec = _build_unraveling(unraveling, model)
    rep = model.representation
    active = spec.active_representation(rep)
    rng = np.random.default_rng(seed)
    witnesses = []
    ts = rng.uniform(0.0, t_max, size=samples)
    for t in ts:
        psi = haar_state(rng, rep.dim)
        if spec.kind == "r":
            op = rate_operator_R(active, float(t), psi)
        else:
            op = rate_operator_W(active, float(t), psi)
        lo = float(np.linalg.eigvalsh(op.matrix)[0])
        if lo < -PSD_TOL:
            witnesses.append({"t": float(t), "magnitude": -lo, "input": psi})
    return DivisibilityReport(
        property_name=f"RatePositivity({unraveling})",
        verdict="fails" if witnesses else "holds",
        witnesses=witnesses,
        samples_used=samples,
        t_grid=np.sort(ts),
    )


def cmd_check(args) -> int:
    model = resolve_model(args.model)
    grid = np.linspace(0.0, args.tmax, args.grid)
    prop = args.property
    if prop == "cp":
        report = check_cp_divisibility(model.representation, grid)
    elif prop == "p":
        report = check_p_divisibility(model.representation, grid, n_states=args.samples)
    elif prop == "dissipativity":
        report = check_dissipativity(model.representation, grid, n_operators=args.samples)
    elif prop.startswith("rate-positivity:"):
        report = _rate_positivity_report(model, prop.split(":", 1)[1],
                                         args.samples, args.tmax)
    else:
        raise SchemaError("--property",
                          "expected cp, p, dissipativity, or rate-positivity:<unraveling>")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    from . import plots

    plots.plot_check_report(report, out / "report.png")
    first = report.first_witness_time()
    print(f"{report.property_name}: {report.verdict}"
          + (f" (first witness at t={first:.4f})" if first is not None else ""))
    return 0 if report.holds else 3


def cmd_compare(config: RunConfig, unravelings: list[str]) -> int:
    config.validate()
    if len(unravelings) < 2:
        raise SchemaError("--unraveling", "compare needs at least two unravelings")
    model = resolve_model(config.model)
    grid = config.grid()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    ensembles = {}
    for name in unravelings:
        try:
            spec = _build_unraveling(name, model)
            ensemble = run_ensemble(spec, model.representation, model.initial_state,
                                    grid, config.n_traj, config.seed,
                                    workers=config.workers)
            ensembles[name] = ensemble
            rows.append(ensemble_summary(ensemble, model, config))
        except RoqjError as exc:
            log.warning("unraveling %s failed: %s", name, exc)
            rows.append({"model": model.name, "unraveling": name,
                         "error": f"{type(exc).__name__}: {exc}"})

    (out / "comparison.json").write_text(json.dumps(rows, indent=2) + "\n")
    cols = ["unraveling", "asymptotic_jumps", "deterministic_changes",
            "time_independent_postjump_states", "final_effective_size",
            "max_reference_deviation_in_se", "error"]
    with open(out / "comparison.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            final_size = ""
            if "effective_ensemble_sizes" in row:
                final_size = str(list(row["effective_ensemble_sizes"].values())[-1])
            fh.write(",".join(str(row.get(c, "")) if c != "final_effective_size"
                              else final_size for c in cols) + "\n")
    from . import plots

    reference = integrate_master_equation(
        model.representation, projector(model.initial_state), grid)
    plots.plot_comparison(ensembles, out / "comparison.png", reference=reference)
    print(f"wrote {out}/comparison.json, comparison.csv, comparison.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roqj",
        description="Quantum-jump unravelings of time-local master equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="preset name or model JSON path")
        p.add_argument("--ntraj", type=int, default=10000)
        p.add_argument("--dt", type=float, default=0.002)
        p.add_argument("--tmax", type=float, default=5.0)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default="roqj-out")

    sim = sub.add_parser("simulate", help="run a trajectory ensemble")
    common(sim)
    sim.add_argument("--unraveling", required=True,
                     help="mcwf | w | r1 | r2 | r3 | r1prime | fixed-postjump:y=<expr>")

    chk = sub.add_parser("check", help="run a divisibility/positivity check")
    chk.add_argument("--model", required=True)
    chk.add_argument("--property", required=True,
                     help="cp | p | dissipativity | rate-positivity:<unraveling>")
    chk.add_argument("--samples", type=int, default=1000)
    chk.add_argument("--grid", type=int, default=200)
    chk.add_argument("--tmax", type=float, default=5.0)
    chk.add_argument("--out", default="roqj-out")

    cmp_ = sub.add_parser("compare", help="run several unravelings side by side")
    common(cmp_)
    cmp_.add_argument("--unraveling", action="append", required=True,
                      help="repeat or comma-separate; at least two required")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ROQJ_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.command == "simulate":
            config = RunConfig(model=args.model, unraveling=args.unraveling,
                               n_traj=args.ntraj, dt=args.dt, t_max=args.tmax,
                               seed=args.seed, workers=args.workers, out=args.out)
            return cmd_simulate(config)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "compare":
            names = [u for group in args.unraveling for u in group.split(",") if u]
            config = RunConfig(model=args.model, unraveling=names[0] if names else "",
                               n_traj=args.ntraj, dt=args.dt, t_max=args.tmax,
                               seed=args.seed, workers=args.workers, out=args.out)
            return cmd_compare(config, names)
        return 1
    except (NegativeRate, NegativeCoefficient) as exc:
        print(f"invalid unraveling: {exc}", file=sys.stderr)
        if isinstance(exc, NegativeRate) and exc.state is not None:
            print(f"  witness state: {np.array2string(exc.state, precision=6)}",
                  file=sys.stderr)
        return 2
    except RoqjError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
