"""Command-line harness reproducing the numerical experiments.

Subcommands:
  solve-fom   full-order BB solve, writes the control and a JSON summary
  table1      equivalence of the two reduced formulations, per beta
  table2      method comparison FOM / adaptive ROM / adaptive Full-ROM
  history     per-iteration bound and basis-size series for each beta
  selftest    quick numerical sanity battery

Configuration is a flat key = value file ('#' starts a comment); every key
has a default, so all commands run without any file.  The default problem
size (n_s = 33, K = 50) keeps desk runs in seconds; --paper-scale switches
to the full n_s = 101, K = 100 discretization, which takes minutes.  All
numeric CSV output uses scientific notation with 12 significant digits;
wall-time and speed-up columns are the only nondeterministic ones.

Exit codes: 0 success, 2 solver failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adaptive import AdaptiveConfig, run_adaptive, run_adaptive_state_only
from .estimator import estimate, true_error
from .fem import build_space
from .fom import FomSolver, kkt_oracle
from .numerics import NotSpd, SpdFactor, sparse_sym
from .optimizer import BbConfig, bb_minimize
from .pod import SnapshotSet, compute_pod, projection_error
from .problem import Trajectory, model_problem, space_time_inner, space_time_norm
from .rom import (
    build_reduced,
    lift_control,
    solve_reduced_adjoint,
    solve_reduced_ocp_full,
    solve_reduced_ocp_state_only,
    solve_reduced_state,
    solve_reduced_state_full,
)


class ConfigError(Exception):
    """Malformed configuration file or option value."""


class SolverFailure(Exception):
    """A solve did not reach its tolerance."""


@dataclass
class RunConfig:
    """Flat run configuration with desk-scale defaults."""

    n_s: int = 33
    time_steps: int = 50
    horizon: float = 1.0
    betas: tuple = (0.1, 0.01, 0.001)
    tau: float = 1e-8
    tau_ref: float = 1e-12
    energy_tol: float = 1e-12
    rank_mode: str = "energy"
    bb_max_iters: int = 10000
    out_dir: str = "results"
    seed: int = 0


_INT_KEYS = {"n_s", "time_steps", "bb_max_iters", "seed"}
_FLOAT_KEYS = {"horizon", "tau", "tau_ref", "energy_tol"}
_LIST_KEYS = {"betas"}
_STR_KEYS = {"rank_mode", "out_dir"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _LIST_KEYS | _STR_KEYS


def parse_config(text: str) -> RunConfig:
    """Parse the flat key = value format into a RunConfig."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _LIST_KEYS:
                values[key] = tuple(float(x) for x in val.split(",") if x.strip())
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    cfg = RunConfig(**values)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    if cfg.n_s < 2:
        raise ConfigError(f"n_s must be at least 2, got {cfg.n_s}")
    if cfg.time_steps < 1:
        raise ConfigError(f"time_steps must be positive, got {cfg.time_steps}")
    if cfg.horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {cfg.horizon}")
    if not cfg.betas or any(b <= 0 for b in cfg.betas):
        raise ConfigError(f"betas must be positive, got {cfg.betas}")
    if cfg.tau <= 0 or cfg.tau_ref <= 0:
        raise ConfigError("tau and tau_ref must be positive")
    if cfg.energy_tol < 0:
        raise ConfigError(f"energy_tol must be nonnegative, got {cfg.energy_tol}")
    if cfg.rank_mode not in ("energy", "max"):
        raise ConfigError(f"rank_mode must be 'energy' or 'max', got {cfg.rank_mode!r}")
    if cfg.bb_max_iters < 1:
        raise ConfigError(f"bb_max_iters must be positive, got {cfg.bb_max_iters}")


def serialize_config(cfg: RunConfig) -> str:
    """Emit a config file that parses back to an equal RunConfig."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        val = getattr(cfg, f.name)
        if f.name in _LIST_KEYS:
            text = ",".join(repr(x) for x in val)
        else:
            text = repr(val) if not isinstance(val, str) else val
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    """Scientific notation with 12 significant digits; empty for missing."""
    if x is None:
        return ""
    return f"{float(x):.11e}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _beta_tag(beta: float) -> str:
    return f"{beta:.0e}"


def _build_problem(cfg: RunConfig, beta: float, zero_target: bool = False):
    prob = model_problem(cfg.n_s, cfg.time_steps, beta, cfg.horizon)
    if zero_target:
        prob = dataclasses.replace(
            prob, y_d=Trajectory.zeros(prob.grid, prob.y_d.dim)
        )
    return prob


def _solve_fom_bb(prob, tau: float, max_iters: int, solver=None):
    """Full-order BB solve; returns (control, report, cost)."""
    solver = solver if solver is not None else FomSolver(prob)
    mu = prob.space.m_u.mat
    dt = prob.grid.dt

    def grad_oracle(u_flat):
        grad, y, _ = solver.gradient(Trajectory(u_flat, prob.grid))
        return grad.values, y

    def inner(a, b):
        return dt * float(np.sum(a * (mu @ b.T).T))

    cfg = BbConfig(
        tol=tau,
        max_iters=max_iters,
        initial_step=min(max(1.0 / prob.beta, 1e-12), 1e12),
    )
    start = np.zeros((prob.grid.steps, prob.control_dim))
    u_flat, report = bb_minimize(grad_oracle, inner, start, cfg)
    u = Trajectory(u_flat, prob.grid)
    y = solver.solve_state(u)
    return u, report, solver.cost(u, y)


def cmd_solve_fom(cfg: RunConfig, out: Path, zero_target: bool = False) -> int:
    beta = cfg.betas[0]
    prob = _build_problem(cfg, beta, zero_target)
    tic = time.perf_counter()
    u, report, cost_value = _solve_fom_bb(prob, cfg.tau, cfg.bb_max_iters)
    wall = time.perf_counter() - tic

    header = ["t"] + [f"u{i}" for i in range(prob.control_dim)]
    rows = [
        [_fmt(t_k)] + [_fmt(v) for v in u.values[k]]
        for k, t_k in enumerate(prob.grid.step_times())
    ]
    _write_csv(out / "fom_solution.csv", header, rows)
    summary = {
        "beta": beta,
        "n_s": cfg.n_s,
        "time_steps": cfg.time_steps,
        "tau": cfg.tau,
        "iterations": report.iterations,
        "grad_norm": report.grad_norm,
        "cost": cost_value,
        "converged": report.converged,
        "wall_s": wall,
    }
    if not report.converged:
        summary["note"] = "MaxIters"
    out.mkdir(parents=True, exist_ok=True)
    (out / "fom_report.json").write_text(json.dumps(summary, indent=2) + "\n")
    if not report.converged:
        print(
            f"solve-fom: not converged after {report.iterations} iterations "
            f"(grad_norm {report.grad_norm:.3e} > tau {cfg.tau:.3e}) [MaxIters]",
            file=sys.stderr,
        )
        return 2
    print(
        f"solve-fom: beta={beta:g} converged in {report.iterations} iterations, "
        f"cost {cost_value:.6e}, wall {wall:.2f}s"
    )
    return 0


def _initial_basis(prob, u0, energy_tol, solver):
    """POD basis from the state/adjoint pair at the initial control."""
    snaps = SnapshotSet()
    y = solver.solve_state(u0)
    p = solver.solve_adjoint(y)
    snaps.add(y, "state_0")
    snaps.add(p, "adjoint_0")
    return compute_pod(snaps, prob.space.w_h1, prob.grid, energy_tol)


def cmd_table1(cfg: RunConfig, out: Path) -> int:
    """Equivalence of state-only and full reduction at tight tolerance."""
    space = build_space(cfg.n_s)
    header = [
        "beta",
        "r",
        "r_u",
        "err_u",
        "err_y",
        "err_p",
        "time_state_only_s",
        "time_full_s",
        "speedup",
    ]
    rows = []
    for beta in cfg.betas:
        prob = model_problem(cfg.n_s, cfg.time_steps, beta, cfg.horizon, space=space)
        solver = FomSolver(prob)
        u0 = Trajectory.zeros(prob.grid, prob.control_dim)
        basis = _initial_basis(prob, u0, cfg.energy_tol, solver)
        rm = build_reduced(prob, basis)
        inner_cfg = BbConfig(
            tol=cfg.tau_ref,
            max_iters=cfg.bb_max_iters,
            initial_step=min(max(1.0 / beta, 1e-12), 1e12),
        )

        tic = time.perf_counter()
        u_state, rep_state = solve_reduced_ocp_state_only(rm, inner_cfg)
        t_state = time.perf_counter() - tic
        tic = time.perf_counter()
        u_hat, rep_full = solve_reduced_ocp_full(rm, inner_cfg)
        t_full = time.perf_counter() - tic
        if not (rep_state.converged and rep_full.converged):
            raise SolverFailure(
                f"reduced solves did not reach tau_ref at beta={beta:g}"
            )

        u_full = lift_control(rm, u_hat)
        err_u = true_error(u_full, u_state, prob.space.m_u, prob.grid)
        y_state = solve_reduced_state_full(rm, u_state)
        y_full = solve_reduced_state(rm, u_hat)
        m_hat = rm.m_hat
        err_y = space_time_norm(y_full - y_state, m_hat, prob.grid)
        p_state = solve_reduced_adjoint(rm, y_state)
        p_full = solve_reduced_adjoint(rm, y_full)
        err_p = space_time_norm(p_full - p_state, m_hat, prob.grid)
        rows.append(
            [
                _fmt(beta),
                str(rm.rank),
                str(rm.control_rank),
                _fmt(err_u),
                _fmt(err_y),
                _fmt(err_p),
                _fmt(t_state),
                _fmt(t_full),
                _fmt(t_state / t_full if t_full > 0 else float("inf")),
            ]
        )
        print(
            f"table1: beta={beta:g} r={rm.rank} err_u={err_u:.3e} "
            f"speedup={t_state / max(t_full, 1e-12):.1f}"
        )
    _write_csv(out / "table1.csv", header, rows)
    return 0


def cmd_table2(cfg: RunConfig, out: Path) -> int:
    """Wall-time and certificate comparison of the three methods."""
    space = build_space(cfg.n_s)
    header = [
        "beta",
        "method",
        "time_s",
        "speedup",
        "k",
        "lower",
        "err_u",
        "upper",
    ]
    rows = []
    for beta in cfg.betas:
        prob = model_problem(cfg.n_s, cfg.time_steps, beta, cfg.horizon, space=space)
        eps = cfg.tau / beta

        ref_solver = FomSolver(prob)
        u_ref, rep_ref, _ = _solve_fom_bb(prob, cfg.tau_ref, cfg.bb_max_iters, ref_solver)
        if not rep_ref.converged:
            raise SolverFailure(f"reference solve did not converge at beta={beta:g}")

        fom_solver = FomSolver(prob)
        tic = time.perf_counter()
        u_fom, rep_fom, _ = _solve_fom_bb(prob, cfg.tau, cfg.bb_max_iters, fom_solver)
        t_fom = time.perf_counter() - tic
        if not rep_fom.converged:
            raise SolverFailure(f"FOM solve did not converge at beta={beta:g}")

        u0 = Trajectory.zeros(prob.grid, prob.control_dim)
        acfg = AdaptiveConfig(
            tolerance=eps,
            energy_tol=cfg.energy_tol,
            rank_mode=cfg.rank_mode,
            inner=BbConfig(
                tol=cfg.tau,
                max_iters=cfg.bb_max_iters,
                initial_step=min(max(1.0 / beta, 1e-12), 1e12),
            ),
        )

        tic = time.perf_counter()
        u_rom, hist_rom, ok_rom = run_adaptive_state_only(prob, u0, acfg)
        t_rom = time.perf_counter() - tic
        tic = time.perf_counter()
        u_frm, hist_frm, ok_frm = run_adaptive(prob, u0, acfg)
        t_frm = time.perf_counter() - tic
        if not (ok_rom and ok_frm):
            raise SolverFailure(f"adaptive run did not certify at beta={beta:g}")

        mu, grid = prob.space.m_u, prob.grid

        def row(method, t, k, u_val, bounds):
            err = true_error(u_val, u_ref, mu, grid)
            return [
                _fmt(beta),
                method,
                _fmt(t),
                _fmt(t_fom / t if t > 0 else float("inf")),
                str(k),
                _fmt(bounds.lower if bounds else None),
                _fmt(err),
                _fmt(bounds.upper if bounds else None),
            ]

        last_rom = hist_rom.rows[-1]
        last_frm = hist_frm.rows[-1]
        rows.append(row("fom", t_fom, rep_fom.iterations, u_fom, None))
        rows.append(row("rom", t_rom, len(hist_rom), u_rom, last_rom))
        rows.append(row("full_rom", t_frm, len(hist_frm), u_frm, last_frm))
        print(
            f"table2: beta={beta:g} fom {rep_fom.iterations} iters {t_fom:.2f}s | "
            f"rom {len(hist_rom)} outers {t_rom:.2f}s | "
            f"full_rom {len(hist_frm)} outers {t_frm:.2f}s"
        )
    _write_csv(out / "table2.csv", header, rows)
    return 0


def cmd_history(cfg: RunConfig, out: Path) -> int:
    """Per-iteration bound series and basis sizes for each beta."""
    space = build_space(cfg.n_s)
    basis_rows = []
    for beta in cfg.betas:
        prob = model_problem(cfg.n_s, cfg.time_steps, beta, cfg.horizon, space=space)
        eps = cfg.tau / beta
        ref_solver = FomSolver(prob)
        u_ref, rep_ref, _ = _solve_fom_bb(prob, cfg.tau_ref, cfg.bb_max_iters, ref_solver)
        if not rep_ref.converged:
            raise SolverFailure(f"reference solve did not converge at beta={beta:g}")
        u0 = Trajectory.zeros(prob.grid, prob.control_dim)
        acfg = AdaptiveConfig(
            tolerance=eps,
            energy_tol=cfg.energy_tol,
            rank_mode=cfg.rank_mode,
            inner=BbConfig(
                tol=cfg.tau,
                max_iters=cfg.bb_max_iters,
                initial_step=min(max(1.0 / beta, 1e-12), 1e12),
            ),
        )
        _, history, converged = run_adaptive(prob, u0, acfg, u_ref=u_ref)
        if not converged:
            raise SolverFailure(f"adaptive run did not certify at beta={beta:g}")

        header = ["k", "grad_norm", "lower", "upper", "true_error", "r", "r_u",
                  "inner_iters", "wall_ms"]
        rows = [
            [
                str(row.k),
                _fmt(row.grad_norm),
                _fmt(row.lower),
                _fmt(row.upper),
                _fmt(row.true_error),
                str(row.r),
                str(row.r_u),
                str(row.inner_iters),
                _fmt(row.wall_ms),
            ]
            for row in history.rows
        ]
        _write_csv(out / f"history_beta{_beta_tag(beta)}.csv", header, rows)
        basis_rows.extend(
            [_fmt(beta), str(row.k), str(row.r), str(row.r_u)]
            for row in history.rows
        )
        print(
            f"history: beta={beta:g} {len(history)} outer iterations, "
            f"final upper {history.rows[-1].upper:.3e}"
        )
    _write_csv(out / "basis_sizes.csv", ["beta", "k", "r", "r_u"], basis_rows)
    return 0


def cmd_selftest(cfg: RunConfig) -> int:
    """Fast numerical sanity battery; prints one line per check."""
    rng = np.random.default_rng(cfg.seed)
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        print(f"selftest {status}: {name}" + (f" ({detail})" if detail else ""))
        failures += 0 if ok else 1

    # SPD solve residual
    b_mat = rng.standard_normal((30, 30))
    spd = sparse_sym(b_mat @ b_mat.T + 30.0 * np.eye(30))
    rhs = rng.standard_normal(30)
    x = SpdFactor(spd).solve(rhs)
    rel = np.linalg.norm(spd.mat @ x - rhs) / np.linalg.norm(rhs)
    check("spd solve residual", rel <= 1e-10, f"rel={rel:.2e}")

    # gradient vs central finite differences
    prob = model_problem(9, 10, 1e-2)
    solver = FomSolver(prob)
    u = Trajectory(rng.standard_normal((10, prob.control_dim)), prob.grid)
    v = Trajectory(rng.standard_normal((10, prob.control_dim)), prob.grid)
    grad, _, _ = solver.gradient(u)
    pairing = space_time_inner(grad, v, prob.space.m_u, prob.grid)
    h = 1e-5
    up = Trajectory(u.values + h * v.values, prob.grid)
    dn = Trajectory(u.values - h * v.values, prob.grid)
    fd = (
        solver.cost(up, solver.solve_state(up))
        - solver.cost(dn, solver.solve_state(dn))
    ) / (2 * h)
    rel = abs(fd - pairing) / max(abs(fd), 1e-300)
    check("gradient matches finite differences", rel <= 1e-6, f"rel={rel:.2e}")

    # POD tail identity
    grid = prob.grid
    snaps = SnapshotSet()
    for i in range(3):
        snaps.add(
            Trajectory(rng.standard_normal((grid.steps, prob.space.dim)), grid),
            f"random_{i}",
        )
    basis = compute_pod(snaps, prob.space.w_h1, grid, 0.0)
    r = max(1, basis.rank // 2)
    trunc = basis.truncate(r)
    err = projection_error(snaps, trunc, prob.space.w_h1, grid)
    tail = trunc.tail_energy
    rel = abs(err - tail) / max(tail, 1e-300)
    check("pod tail identity", rel <= 1e-8, f"rel={rel:.2e}")

    # estimator sandwich on a tiny instance
    tiny = model_problem(5, 4, 1e-1)
    tiny_solver = FomSolver(tiny)
    u_star = kkt_oracle(tiny, tiny_solver)
    ok = True
    worst = 0.0
    for _ in range(5):
        u_rand = Trajectory(
            rng.standard_normal((tiny.grid.steps, tiny.control_dim)), tiny.grid
        )
        bounds, _, _ = estimate(tiny, u_rand, solver=tiny_solver)
        err = true_error(u_rand, u_star, tiny.space.m_u, tiny.grid)
        ok = ok and bounds.lower <= err + 1e-12 and err <= bounds.upper + 1e-12
        worst = max(worst, bounds.lower - err, err - bounds.upper)
    check("estimator sandwich", ok, f"worst violation={worst:.2e}")

    return 0 if failures == 0 else 2


def _load_config(args) -> RunConfig:
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cfg = parse_config(path.read_text())
    else:
        cfg = RunConfig()
    if getattr(args, "paper_scale", False):
        cfg = dataclasses.replace(cfg, n_s=101, time_steps=100)
    if getattr(args, "beta", None):
        try:
            betas = tuple(float(x) for x in args.beta.split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"bad --beta list: {exc}") from exc
        if not betas:
            raise ConfigError("--beta list is empty")
        cfg = dataclasses.replace(cfg, betas=betas)
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    _validate_config(cfg)
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="podopt",
        description="Adaptive POD reduction for parabolic optimal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument(
            "--beta", help="comma-separated regularization weights (overrides config)"
        )
        p.add_argument(
            "--paper-scale",
            action="store_true",
            help="full discretization n_s=101, K=100 (minutes, not seconds)",
        )

    p = sub.add_parser("solve-fom", help="full-order BB solve at the first beta")
    add_common(p)
    p.add_argument(
        "--zero-target",
        action="store_true",
        help="replace the tracking target by zero (expects the zero control)",
    )
    for name, help_text in [
        ("table1", "reduced-formulation equivalence table"),
        ("table2", "method comparison table"),
        ("history", "adaptive iteration history and basis sizes"),
        ("selftest", "quick numerical sanity battery"),
    ]:
        add_common(sub.add_parser(name, help=help_text))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        out = Path(cfg.out_dir)
        if args.command == "solve-fom":
            return cmd_solve_fom(cfg, out, zero_target=args.zero_target)
        if args.command == "table1":
            return cmd_table1(cfg, out)
        if args.command == "table2":
            return cmd_table2(cfg, out)
        if args.command == "history":
            return cmd_history(cfg, out)
        if args.command == "selftest":
            return cmd_selftest(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (SolverFailure, NotSpd) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())
