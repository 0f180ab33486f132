"""Command-line experiment runner.

Subcommands: ``run`` (one experiment), ``bounds`` (step-size bound report),
``sweep`` (stability grids), ``verify`` (property corpus), ``preset``
(list shipped configurations). All artifacts land under ``--out`` and are
byte-reproducible: re-running an identical config yields identical CSVs.

Exit codes: 0 success, 1 property-suite failure or internal error,
2 divergence, 3 configuration validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import spectral, svg, verify
from .config import ConfigError, ExperimentConfig, parse_config
from .cost import aggregate_hessian, sum_gradient
from .engine import integrate
from .graph import laplacian
from .nonlinear import sector_bounds
from .svmlab import dsvm_experiment

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DIVERGED = 2
EXIT_CONFIG = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_OK
    try:
        return args.handler(args)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtflow",
        description="gradient-tracking consensus optimization experiments",
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="path to a JSON config")
        src.add_argument("--preset", help="name of a shipped preset")
        p.add_argument("--out", type=Path, default=Path("out"), help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--experimental-directed", action="store_true",
                       help="use the directed circulant topology (spectral checks "
                            "run; convergence is not asserted)")

    p_run = sub.add_parser("run", help="execute one experiment")
    add_common(p_run)
    p_run.set_defaults(handler=cmd_run)

    p_bounds = sub.add_parser("bounds", help="report the step-size bounds")
    add_common(p_bounds)
    p_bounds.set_defaults(handler=cmd_bounds)

    p_sweep = sub.add_parser("sweep", help="stability sweep over config axes")
    add_common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p_sweep.set_defaults(handler=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the property corpus")
    p_verify.set_defaults(handler=cmd_verify)

    p_preset = sub.add_parser("preset", help="preset utilities")
    p_preset.add_argument("action", choices=["list"])
    p_preset.set_defaults(handler=cmd_preset)
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.preset:
        text = cfgmod.load_preset(args.preset)
    else:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError([f"cannot read config: {err}"])
    cfg = parse_config(text)
    if args.seed is not None or getattr(args, "experimental_directed", False):
        raw = cfg.normalized()
        if args.seed is not None:
            raw["seed"] = args.seed
        if getattr(args, "experimental_directed", False):
            raw.setdefault("network", {})["directed"] = True
        cfg = parse_config(json.dumps(raw))
    return cfg


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


SATURATION_DOMAIN = 100.0  # operating interval for domain-relative bounds


def _combined_sector(cfg: ExperimentConfig, mode: str = "linearized"):
    """Worst-case sector across the two dynamics lines (min kappa, max upper).

    Saturation is only sector-bounded on a bounded interval; its bounds are
    evaluated on the default operating domain and the run report warns when
    the trajectory left it.
    """
    def line_bounds(spec):
        g = cfgmod.build_nonlinearity(spec)
        domain = ((-SATURATION_DOMAIN, SATURATION_DOMAIN)
                  if g.kind == "saturation" else (-np.inf, np.inf))
        return sector_bounds(g, domain, mode=mode)

    bx = line_bounds(cfg.sections["nonlinearity"]["x"])
    by = line_bounds(cfg.sections["nonlinearity"]["y"])
    return min(bx.kappa, by.kappa), max(bx.upper, by.upper), bx, by


def _initial_state(cfg: ExperimentConfig, n: int, m: int) -> np.ndarray:
    return np.random.default_rng(cfg.seed + 5).uniform(0.0, 1.0, size=(n, m))


def _bound_report(cfg: ExperimentConfig, costs, x0):
    """Step-size bounds at the initial operating point."""
    schedule = cfgmod.build_schedule(cfg)
    lap = laplacian(schedule.base_graph)
    hess = aggregate_hessian(costs, x0)
    m = x0.shape[1]
    base = spectral.assemble(lap, lap, hess, None, 0.0, m)
    rep = spectral.spectral_report(base)
    kappa, upper, _, _ = _combined_sector(cfg)
    if kappa <= 0:
        # dead-zone links: no positive lower sector slope exists; report the
        # bounds for the identity envelope and flag it
        kappa_eff = 1e-9
        flagged = True
    else:
        kappa_eff, flagged = kappa, False
    bounds = spectral.step_size_bounds(
        kappa_eff, upper, hess.infinity_norm, rep.slowest_decay,
        rep.spectral_radius, schedule.base_graph.n, m)
    return bounds, rep, flagged


def _bounds_lines(cfg, bounds, rep, flagged) -> list[str]:
    alpha = cfg["solver"]["alpha"]
    adm = bounds.admissible(alpha)
    num = lambda v: format(float(v), ".17g")
    lines = [
        f"kappa: {num(bounds.kappa)}",
        f"upper_sector: {num(bounds.upper)}",
        f"gamma: {num(bounds.gamma)}",
        f"slowest_decay: {num(bounds.slowest_decay)}",
        f"spectral_radius: {num(bounds.spectral_radius)}",
        f"eigen_ratio: {num(bounds.spectral_radius / bounds.slowest_decay)}",
        f"sector_ratio: {num(bounds.upper / bounds.kappa)}",
        f"alpha_bar_matching: {num(bounds.matching)}",
        f"alpha_bar_spectral: {num(bounds.spectral)}",
        f"alpha_bar_tight: {num(bounds.tight)}",
        f"alpha: {num(alpha)}",
        f"alpha_admissible_matching: {adm['matching']}",
        f"alpha_admissible_spectral: {adm['spectral']}",
        f"alpha_admissible_tight: {adm['tight']}",
    ]
    if flagged:
        lines.append("warning: lower sector slope is zero (dead zone); bounds "
                     "use a nominal epsilon and certify nothing")
    return lines


def cmd_bounds(args) -> int:
    cfg = _load_config(args)
    costs, x0, _ = _build_costs(cfg)
    bounds, rep, flagged = _bound_report(cfg, costs, x0)
    lines = _bounds_lines(cfg, bounds, rep, flagged)
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(args.out, "bounds.txt", text)
    return EXIT_OK


def _build_costs(cfg: ExperimentConfig):
    """Returns (costs, x0, context) where context carries svm data when present."""
    if cfg["cost"]["kind"] == "quadratic":
        costs = cfgmod.build_quadratic_costs(cfg)
        m = cfg["cost"]["m"]
        x0 = _initial_state(cfg, len(costs), m)
        return costs, x0, None
    data = cfgmod.build_dataset(cfg)
    part = cfgmod.build_partition(cfg, data)
    costs = cfgmod.build_svm_costs(cfg, data, part)
    x0 = _initial_state(cfg, len(costs), costs[0].m)
    return costs, x0, (data, part)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = args.out
    meta = ["config:"] + ["  " + ln for ln in cfg.to_json().splitlines()]

    costs, x0, context = _build_costs(cfg)
    bounds, rep, flagged = _bound_report(cfg, costs, x0)
    meta += ["", "bounds:"] + ["  " + ln for ln in _bounds_lines(cfg, bounds, rep, flagged)]

    schedule = cfgmod.build_schedule(cfg)
    solver = cfgmod.build_solver(cfg, schedule)

    if context is None:
        q_sum = sum(c.Q for c in costs)
        x_star = np.linalg.solve(q_sum, sum(c.Q @ c.b for c in costs))
        reference = np.tile(x_star, (len(costs), 1))
        trace = integrate(costs, x0, solver, reference=reference)
        status = trace.status
        final_gn = float(np.linalg.norm(sum_gradient(costs, trace.final_x)))
        meta += ["", "result:",
                 f"  status: {status}",
                 f"  optimizer: {' '.join(format(v, '.17g') for v in x_star)}",
                 f"  final_grad_sum_norm: {format(final_gn, '.17g')}",
                 f"  final_consensus_error: {format(trace.consensus_error[-1], '.17g')}"]
    else:
        data, part = context
        cost_cfg = cfg["cost"]
        report = dsvm_experiment(
            data, part, solver,
            C=cost_cfg["C"], mu=cost_cfg["mu"], eps_nu=cost_cfg["eps_nu"],
            regularizer_mode=cost_cfg["regularizer_mode"],
            oracle_tol=cost_cfg["oracle_tol"], x0=x0,
        )
        trace = report.trace
        status = report.status
        meta += ["", "result:"] + ["  " + ln for ln in report.summary_lines()]
        _write(out, "oracle_classifier.txt",
               report.oracle.classifier.to_text(objective=report.oracle.objective,
                                                accuracy=report.oracle_accuracy))
        _write(out, "consensus_classifier.txt",
               report.consensus.to_text(accuracy=report.consensus_accuracy))

    meta.append(f"  max_abs_state: {format(trace.max_abs_state, '.17g')}")
    kinds = {cfg.sections["nonlinearity"][line]["kind"] for line in ("x", "y")}
    if "saturation" in kinds and trace.max_abs_state > SATURATION_DOMAIN:
        meta.append(f"  warning: trajectory left the declared sector domain "
                    f"[-{SATURATION_DOMAIN:g}, {SATURATION_DOMAIN:g}]; the "
                    "saturation bounds above do not cover it")

    _write(out, "trace.csv", trace.to_csv())
    _write(out, "metadata.txt", "\n".join(meta) + "\n")

    if cfg["outputs"]["plots"]:
        n, m = trace.states_x.shape[1:]
        state_series = {
            f"agent{i}[{j}]": (trace.times, trace.states_x[:, i, j])
            for i in range(n) for j in range(m)
        }
        _write(out, "states.svg", svg.line_chart(state_series, "agent states", "t", "x"))
        _write(out, "cost.svg", svg.line_chart(
            {"F(x)": (trace.times, trace.cost)}, "stacked cost", "t", "F"))
        _write(out, "grad_sum.svg", svg.line_chart(
            {"|sum grad|": (trace.times, trace.grad_sum_norm)},
            "gradient-sum norm", "t", "norm", log_y=True))

    print(f"status: {status}  (artifacts in {out})")
    return EXIT_OK if status == "completed" else EXIT_DIVERGED


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    axes = dict(cfg["sweep"]["axes"])
    if not axes:
        return cmd_run(args)
    mode = cfg["sweep"]["mode"]
    rows = (_sweep_spectral if mode == "spectral" else _sweep_dynamics)(cfg, axes, args.jobs)

    header = list(rows[0].keys())
    csv_lines = [",".join(header)]
    for row in rows:
        csv_lines.append(",".join(_csv_cell(row[k]) for k in header))
    _write(args.out, "sweep.csv", "\n".join(csv_lines) + "\n")

    axis_names = sorted(axes)
    if len(axis_names) >= 2:
        a_name, b_name = axis_names[0], axis_names[1]
    else:
        a_name, b_name = axis_names[0], None
    a_vals = sorted({row[a_name] for row in rows})
    b_vals = sorted({row[b_name] for row in rows}) if b_name else [0]
    grid = np.full((len(b_vals), len(a_vals)), np.nan)
    for row in rows:
        ia = a_vals.index(row[a_name])
        ib = b_vals.index(row[b_name]) if b_name else 0
        grid[ib, ia] = 1.0 if row["stable"] else 0.0
    _write(args.out, "sweep.svg", svg.heat_map(
        grid, [f"{v:g}" for v in a_vals],
        [f"{v:g}" for v in b_vals] if b_name else [""],
        title=f"stability frontier ({mode})", x_label=a_name, y_label=b_name or ""))

    stable = sum(1 for r in rows if r["stable"])
    print(f"sweep: {stable}/{len(rows)} cells stable  (artifacts in {args.out})")
    return EXIT_OK


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _axis_grid(axes: dict) -> list[dict]:
    names = sorted(axes)
    cells = [{}]
    for name in names:
        cells = [{**cell, name: float(v)} for cell in cells for v in axes[name]]
    return cells


def _run_cells(cells, worker, jobs: int) -> list[dict]:
    """Evaluate independent sweep cells, optionally on a thread pool.

    Results come back in grid order regardless of scheduling; each cell is
    seeded independently so parallel and serial runs agree exactly.
    """
    if jobs <= 1 or len(cells) <= 1:
        return [worker(cell) for cell in cells]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, cells))


def _sweep_spectral(cfg: ExperimentConfig, axes: dict, jobs: int) -> list[dict]:
    """Frozen-gain eigenvalue verdicts per cell.

    For each cell the gains are pinned at the sector edges and at a seeded
    random draw inside the sector; the cell is stable only if every regime
    is. Uses the tight (envelope) sector for the gain draws.
    """
    costs, x0, _ = _build_costs(cfg)
    m = x0.shape[1]
    n = len(costs)
    hess = aggregate_hessian(costs, x0)

    def worker(cell):
        alpha = cell.get("alpha", cfg["solver"]["alpha"])
        khop = int(cell.get("khop", cfg["network"]["khop"]))
        lap = laplacian(cfgmod.build_schedule(cfg, khop=khop).base_graph)
        if "rho" in cell:
            rho = cell["rho"]
            # gains live in the exact envelope; the tabulated ratio uses the
            # linearized convention
            kappa, upper = np.exp(-rho / 2), np.exp(rho / 2)
            ratio = (1 + rho / 2) / (1 - rho / 2) if rho < 2 else float("inf")
        else:
            kappa, upper, bx, _ = _combined_sector(cfg, mode="tight")
            kappa = max(kappa, 1e-9)
            kp, up, _, _ = _combined_sector(cfg)
            ratio = up / kp if kp > 0 else float("inf")
        rng = np.random.default_rng([cfg.seed + 11, *(int(v * 1e6) for v in cell.values())])
        regimes = {
            "lower": np.full(n * m, kappa),
            "unit": np.ones(n * m),
            "upper": np.full(n * m, upper),
            "random": rng.uniform(kappa, upper, size=n * m),
        }
        cells_out = spectral.stability_sweep(lap, lap, hess, [alpha], regimes)
        worst = min(cells_out, key=lambda c: c.stable)
        return {**{k: cell.get(k, None) for k in sorted(axes)},
                "sector_ratio": ratio,
                "zero_count": worst.zero_count,
                "max_nonzero_real": worst.max_nonzero_real,
                "stable": all(c.stable for c in cells_out)}

    return _run_cells(_axis_grid(axes), worker, jobs)


def _sweep_dynamics(cfg: ExperimentConfig, axes: dict, jobs: int) -> list[dict]:
    """Integration verdict per cell; failures are recorded, never fatal."""
    def worker(cell):
        try:
            costs, x0, _ = _build_costs(cfg)
            schedule = cfgmod.build_schedule(cfg, khop=int(cell["khop"]) if "khop" in cell else None)
            solver = cfgmod.build_solver(
                cfg, schedule,
                alpha=cell.get("alpha"), eta=cell.get("eta"),
                rho=cell.get("rho"), t_end=cfg["sweep"]["t_end"])
            trace = integrate(costs, x0, solver)
            gn = float(np.linalg.norm(sum_gradient(costs, trace.final_x)))
            return {**{k: cell.get(k, None) for k in sorted(axes)},
                    "status": trace.status,
                    "final_grad_sum_norm": gn,
                    "stable": trace.status == "completed"}
        except Exception as err:  # cell-level failures recorded, sweep continues
            return {**{k: cell.get(k, None) for k in sorted(axes)},
                    "status": f"error: {err}", "final_grad_sum_norm": float("nan"),
                    "stable": False}

    return _run_cells(_axis_grid(axes), worker, jobs)


def cmd_verify(args) -> int:
    results = verify.run_all()
    for res in results:
        print(res.line())
        for failure in res.failures[:5]:
            print(f"        {failure}")
    passed = sum(1 for r in results if r.passed)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_FAILURE


def cmd_preset(args) -> int:
    for name in cfgmod.preset_names():
        cfg = parse_config(cfgmod.load_preset(name))
        print(f"{name}: {cfg.description}" if cfg.description else name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
