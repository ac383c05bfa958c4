"""Experiment orchestration: error norms, convergence studies, CSV reports.

Error norms measure the discrete control/state against the continuous exact
solution sampled at the right endpoints t_k, matching the l2(L2) convention
of the scheme. Slopes are fitted by least squares on log-log data over the
trailing mesh levels (coarse levels are pre-asymptotic at desk scale).
All runs are deterministic given their configuration.
"""
from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import omega_quadrature
from .control import ReducedProblem, l2_project, solve_control_problem, vi_residual, project_trace
from .evolution import CylinderSystem, solve_state
from .mesh import OmegaMesh, build_cylinder, build_omega, default_zeta, graded_axis
from .oracle import (fractional_ibp_check, manufactured_problem, mode,
                     spectral_solve_state)
from .problem import (ControlBounds, ParameterError, ProblemData, TimeGrid,
                      make_params, select_truncation)

REPORT_COLUMNS = ["case", "s", "gamma", "M", "K", "N", "zeta", "Y",
                  "err_control", "err_state", "cost", "iters", "pg_norm"]
RATE_COLUMNS = ["case", "s", "gamma", "quantity", "slope", "levels_used"]


@dataclass
class ExperimentConfig:
    kind: str = "solve-control"
    s_list: tuple = (0.4,)
    gamma: float = 1.0
    T: float = 1.0
    mu: float = 1.0
    n: int = 2
    K: int = 64
    K_list: tuple = (8, 16, 32, 64)
    M: int = 12
    M_list: tuple = (4, 6, 8, 12, 16)
    Y_list: tuple = (1.0, 1.5, 2.0, 2.5, 3.0)
    zeta: float | None = None
    Y: float | None = None
    tol: float = 1e-9
    max_iter: int = 400
    fit_last: int = 3
    out: str = "out"

    def __post_init__(self):
        for name in ("s_list", "K_list", "M_list", "Y_list"):
            if not getattr(self, name):
                raise ParameterError(f"{name} must be nonempty")


def _parse_list(text, cast=float):
    return tuple(cast(tok) for tok in str(text).replace(" ", "").split(",") if tok)


def load_config(path) -> ExperimentConfig:
    """Read a flat key=value config with [section] headers."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    merged = {}
    for section in parser.sections():
        merged.update(parser[section])
    kwargs = {}
    for key, value in merged.items():
        key = key.strip()
        if key in ("s", "s_list"):
            kwargs["s_list"] = _parse_list(value)
        elif key in ("k_list", "klist"):
            kwargs["K_list"] = _parse_list(value, int)
        elif key in ("m_list", "mlist"):
            kwargs["M_list"] = _parse_list(value, int)
        elif key in ("y_list", "ylist"):
            kwargs["Y_list"] = _parse_list(value)
        elif key == "k":
            kwargs["K"] = int(value)
        elif key == "m":
            kwargs["M"] = int(value)
        elif key == "kind":
            kwargs["kind"] = value.strip()
        elif key == "out":
            kwargs["out"] = value.strip()
        elif key in ("n", "max_iter", "fit_last"):
            kwargs[key] = int(value)
        elif key in ("gamma", "t", "mu", "zeta", "y", "tol"):
            name = {"t": "T", "y": "Y"}.get(key, key)
            kwargs[name] = float(value)
    return ExperimentConfig(**kwargs)


def estimate_dofs(n: int, M: int) -> int:
    """Free unknowns of the cylinder mesh with cells_per_dim = M."""
    return (M - 1) ** n * M


def build_setup(n: int, M: int, s: float, gamma: float, T: float, K: int,
                zeta: float | None = None, Y: float | None = None):
    """Mesh, params and grid for one run (Y and zeta default per theory)."""
    if Y is None:
        Y = select_truncation(max(estimate_dofs(n, M), 8), s, n)
    params = make_params(s, gamma, Y)
    if zeta is None:
        zeta = default_zeta(params.alpha)
    omega = build_omega(n, M)
    mesh = build_cylinder(omega, graded_axis(M, Y, zeta))
    grid = TimeGrid(T=T, K=K)
    return mesh, params, grid


def manufactured_data(man, mu: float) -> ProblemData:
    return ProblemData(n=man.n, forcing=man.forcing, desired_state=man.desired_state,
                       initial=man.initial, bounds=ControlBounds(man.a, man.b, mu))


# -- error norms ---------------------------------------------------------------

def l2Q_error(discrete: np.ndarray, exact, grid: TimeGrid, omega: OmegaMesh,
              kind: str = "state", quad=None) -> float:
    """l2(L2) distance between a discrete field and an exact evaluable.

    ``kind='state'``: discrete is the (K+1, n_interior) trace history of the
    piecewise-bilinear state. ``kind='control'``: discrete is the
    (K, n_cells) piecewise-constant field. The exact function is sampled at
    the right endpoints t_k; space is integrated by the 3-point Gauss rule.
    """
    if quad is None:
        quad = omega_quadrature(omega)
    K = grid.K
    tau = grid.tau
    acc = 0.0
    if kind == "state":
        interior = omega.interior_idx
        if discrete.shape != (K + 1, interior.size):
            raise ParameterError(
                f"state history must have shape {(K + 1, interior.size)}, got {discrete.shape}")
        basis_int = quad.basis[:, interior].tocsr()
        for k in range(1, K + 1):
            diff = basis_int @ discrete[k] - np.asarray(exact(quad.points, k * tau))
            acc += tau * float(quad.weights @ np.square(diff))
    elif kind == "control":
        if discrete.shape != (K, omega.n_cells):
            raise ParameterError(
                f"control must have shape {(K, omega.n_cells)}, got {discrete.shape}")
        for k in range(1, K + 1):
            diff = discrete[k - 1][quad.cell_of] - np.asarray(exact(quad.points, k * tau))
            acc += tau * float(quad.weights @ np.square(diff))
    else:
        raise ParameterError(f"unknown field kind '{kind}'")
    return math.sqrt(acc)


def fit_rate(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ParameterError(f"need at least 3 points for a rate fit, got {xs.size}")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ParameterError("rate fit needs strictly positive values")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# -- reports -------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    case: str
    rows: list = field(default_factory=list)
    slopes: list = field(default_factory=list)

    def fit(self, quantity: str, x_key: str, s=None, gamma=None, last: int = 3):
        rows = [r for r in self.rows
                if (s is None or r["s"] == s)
                and isinstance(r.get(quantity), (int, float))
                and r[quantity] == r[quantity]
                and r.get("converged", True)]
        if len(rows) < 3:
            raise ParameterError(f"need >= 3 converged rows to fit {quantity}, have {len(rows)}")
        rows = sorted(rows, key=lambda r: r[x_key])
        use = rows[-max(last, 3):]
        slope = fit_rate([r[x_key] for r in use], [r[quantity] for r in use])
        self.slopes.append({"case": self.case, "s": s, "gamma": gamma,
                            "quantity": quantity, "slope": slope,
                            "levels_used": len(use)})
        return slope


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_report_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in REPORT_COLUMNS])


def write_rates_csv(slopes, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATE_COLUMNS)
        for row in slopes:
            writer.writerow([_fmt(row.get(col)) for col in RATE_COLUMNS])


def read_report_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            row = {}
            for key, val in rec.items():
                if key in ("case",):
                    row[key] = val
                elif key in ("M", "K", "N", "iters"):
                    row[key] = int(val) if val not in ("", "nan") else None
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


# -- experiment drivers --------------------------------------------------------

def _control_solve(s: float, config: ExperimentConfig, M: int, K: int):
    """Solve the manufactured control problem at one (s, M, K)."""
    man = manufactured_problem(s, config.mu, config.T, gamma=config.gamma, n=config.n)
    mesh, params, grid = build_setup(config.n, M, s, config.gamma, config.T, K,
                                     zeta=config.zeta, Y=config.Y)
    data = manufactured_data(man, config.mu)
    prob = ReducedProblem(data, params, mesh, grid)
    result = solve_control_problem(data, params, mesh, grid, tol=config.tol,
                                   max_iter=config.max_iter, prob=prob)
    quad = prob.system.quad
    err_z = l2Q_error(result.control.values, man.control, grid, mesh.omega,
                      kind="control", quad=quad)
    err_u = l2Q_error(result.state.traces, man.state, grid, mesh.omega,
                      kind="state", quad=quad)
    p_means = np.stack([project_trace(result.adjoint.traces[k], prob.system)
                        for k in range(grid.K)])
    row = {"case": "", "s": s, "gamma": config.gamma, "M": M, "K": K,
           "N": mesh.n_free, "zeta": mesh.axis.zeta, "Y": mesh.axis.Y,
           "err_control": err_z, "err_state": err_u, "cost": result.cost,
           "iters": result.iterations, "pg_norm": result.pg_norm,
           "converged": result.converged,
           "vi": vi_residual(result.control, p_means)}
    return row, result, prob


def _control_case(case: str, s: float, config: ExperimentConfig, M: int, K: int):
    row, _, _ = _control_solve(s, config, M, K)
    row["case"] = case
    return row


def run_convergence_space(config: ExperimentConfig) -> ConvergenceReport:
    """Control/state errors against N at fixed K on the manufactured problem."""
    report = ConvergenceReport(case="conv-space")
    for s in config.s_list:
        for M in config.M_list:
            row = _control_case("conv-space", s, config, M, config.K)
            report.rows.append(row)
        for quantity in ("err_control", "err_state"):
            report.fit(quantity, "N", s=s, gamma=config.gamma, last=config.fit_last)
    return report


def run_convergence_time(config: ExperimentConfig, ref_factor: int = 8) -> ConvergenceReport:
    """Control error against K at fixed M on the manufactured problem.

    At desk-scale M the spatial part of the error against the exact control
    dwarfs the temporal one for every affordable K, so the temporal
    component is isolated the same way the truncation study isolates the
    height: each run is measured against a reference solve with
    ``ref_factor * max(K_list)`` steps on the same mesh. The exact-solution
    errors are still recorded (err_state column) for reference.
    """
    report = ConvergenceReport(case="conv-time")
    for s in config.s_list:
        K_ref = ref_factor * max(config.K_list)
        ref_row, ref_result, ref_prob = _control_solve(s, config, config.M, K_ref)
        for K in config.K_list:
            row, result, prob = _control_solve(s, config, config.M, K)
            row["case"] = "conv-time"
            # expand the coarse piecewise-constant control to the fine grid
            rep = K_ref // K
            fine = np.repeat(result.control.values, rep, axis=0)
            diff = fine - ref_result.control.values
            tau_ref = ref_result.control.grid.tau
            vol = result.control.omega.cell_volume
            row["err_control"] = math.sqrt(tau_ref * vol * float(np.sum(diff ** 2)))
            report.rows.append(row)
        report.fit("err_control", "K", s=s, gamma=config.gamma,
                   last=max(config.fit_last, len(config.K_list)))
    return report


def run_truncation_study(config: ExperimentConfig) -> ConvergenceReport:
    """Decay of the trace differences as the cylinder height grows.

    Solves the homogeneous problem with single-mode initial datum for each
    height; the largest height serves as reference and its row is excluded
    from the fitted exponential slope.
    """
    report = ConvergenceReport(case="truncation")
    s = config.s_list[0]
    n, M, K = config.n, config.M, config.K
    heights = sorted(config.Y_list)
    md = mode(*([1] * n))
    u0 = lambda x: md(x)
    f = lambda x, t: np.zeros(np.atleast_2d(x).shape[0])
    data = ProblemData(n=n, forcing=f, desired_state=f, initial=u0,
                       bounds=ControlBounds(-1.0, 1.0, 1.0))
    grid = TimeGrid(T=config.T, K=K)

    traces = {}
    meshes = {}
    for Y in heights:
        params = make_params(s, config.gamma, Y)
        zeta = config.zeta or default_zeta(params.alpha)
        mesh = build_cylinder(build_omega(n, M), graded_axis(M, Y, zeta))
        system = CylinderSystem(mesh, params, grid)
        traj = solve_state(data, params, mesh, grid, system=system)
        traces[Y] = (traj, system)
        meshes[Y] = mesh
    Ymax = heights[-1]
    ref, ref_system = traces[Ymax]
    for Y in heights[:-1]:
        traj, system = traces[Y]
        diff = traj.traces - ref.traces
        sq = np.einsum("ki,ki->k", diff, (system.M_int @ diff.T).T)
        err = math.sqrt(grid.tau * float(np.sum(sq[1:])))
        report.rows.append({"case": "truncation", "s": s, "gamma": config.gamma,
                            "M": M, "K": K, "N": meshes[Y].n_free,
                            "zeta": meshes[Y].axis.zeta, "Y": Y,
                            "err_control": None, "err_state": err,
                            "cost": None, "iters": None, "pg_norm": None})
    ys = np.array([r["err_state"] for r in report.rows])
    Ys = np.array([r["Y"] for r in report.rows])
    slope = float(np.polyfit(Ys, np.log(ys), 1)[0])
    report.slopes.append({"case": "truncation", "s": s, "gamma": config.gamma,
                          "quantity": "err_state_exp", "slope": slope,
                          "levels_used": len(ys)})
    return report


def run_solve_state(config: ExperimentConfig) -> ConvergenceReport:
    """Single state solve with the control frozen at the projected exact one."""
    report = ConvergenceReport(case="solve-state")
    s = config.s_list[0]
    man = manufactured_problem(s, config.mu, config.T, gamma=config.gamma, n=config.n)
    mesh, params, grid = build_setup(config.n, config.M, s, config.gamma,
                                     config.T, config.K, zeta=config.zeta, Y=config.Y)
    data = manufactured_data(man, config.mu)
    system = CylinderSystem(mesh, params, grid)
    zvals = np.clip(l2_project(man.control, grid, mesh.omega, quad=system.quad),
                    man.a, man.b)
    traj = solve_state(data, params, mesh, grid, control=zvals, system=system)
    err_u = l2Q_error(traj.traces, man.state, grid, mesh.omega, quad=system.quad)
    report.rows.append({"case": "solve-state", "s": s, "gamma": config.gamma,
                        "M": config.M, "K": config.K, "N": mesh.n_free,
                        "zeta": mesh.axis.zeta, "Y": mesh.axis.Y,
                        "err_control": None, "err_state": err_u, "cost": None,
                        "iters": None, "pg_norm": None})
    return report


def run_solve_control(config: ExperimentConfig) -> ConvergenceReport:
    report = ConvergenceReport(case="solve-control")
    for s in config.s_list:
        report.rows.append(_control_case("solve-control", s, config,
                                         config.M, config.K))
    return report


def run_oracle_check(config: ExperimentConfig) -> ConvergenceReport:
    """Identity checks of the fractional calculus and the manufactured optimum."""
    report = ConvergenceReport(case="oracle-check")
    gamma = config.gamma if config.gamma < 1.0 else 0.5
    K_fine = 10_000
    times = np.linspace(0.0, config.T, K_fine + 1)

    checks = []
    res = fractional_ibp_check(times, np.ones_like(times), gamma, times)
    checks.append(("ibp-linear-const", res))
    res = fractional_ibp_check(times, times, gamma, times)
    checks.append(("ibp-linear-linear", res))

    # manufactured optimality residuals per mode (state and adjoint equations)
    for s in config.s_list:
        man = manufactured_problem(s, config.mu, config.T, gamma=config.gamma, n=config.n)
        lam_s = man.lam ** s
        ts = np.linspace(0.05, config.T, 7)
        pts = np.full((1, config.n), 0.35)
        shape = float(mode(*([2] * config.n))(pts, normalized=False)[0])
        res_state = res_adj = 0.0
        for t in ts:
            if config.gamma >= 1.0:
                du = math.exp(t)
                dp = (1.0 - (man.T - t)) * math.exp(t) * (-man.mu)
            else:
                from .oracle import caputo_left, caputo_right
                du = float(caputo_left(np.exp, config.gamma, t))
                dp = -man.mu * float(caputo_right(
                    lambda r: (man.T - r - 1.0) * np.exp(r), config.gamma, t, man.T))
            u = float(man.state(pts, t)[0])
            p = float(man.adjoint(pts, t)[0])
            z = float(man.control(pts, t)[0])
            f = float(man.forcing(pts, t)[0])
            ud = float(man.desired_state(pts, t)[0])
            res_state = max(res_state, abs(du * shape + lam_s * u - f - z))
            res_adj = max(res_adj, abs(dp * shape + lam_s * p - (u - ud)))
        checks.append((f"manufactured-state-residual-s{s}", res_state))
        checks.append((f"manufactured-adjoint-residual-s{s}", res_adj))

    # spectral self-convergence of the fine L1 reference
    md = mode(*([1] * config.n))
    coarse = spectral_solve_state([md], [1.0], None, gamma, 0.5, config.T, K_fine=256)
    fine = spectral_solve_state([md], [1.0], None, gamma, 0.5, config.T, K_fine=512)
    checks.append(("spectral-self-convergence-diff",
                   abs(coarse.final[0] - fine.final[0])))

    for name, value in checks:
        report.rows.append({"case": name, "s": config.s_list[0], "gamma": gamma,
                            "M": None, "K": K_fine, "N": None, "zeta": None,
                            "Y": None, "err_control": None, "err_state": value,
                            "cost": None, "iters": None, "pg_norm": None})
    return report


RUNNERS = {
    "solve-state": run_solve_state,
    "solve-control": run_solve_control,
    "conv-space": run_convergence_space,
    "conv-time": run_convergence_time,
    "truncation": run_truncation_study,
    "oracle-check": run_oracle_check,
}


def run_experiment(config: ExperimentConfig) -> ConvergenceReport:
    if config.kind not in RUNNERS:
        raise ParameterError(f"unknown experiment kind '{config.kind}'")
    report = RUNNERS[config.kind](config)
    out = Path(config.out)
    write_report_csv(report.rows, out / "report.csv")
    if report.slopes:
        write_rates_csv(report.slopes, out / "rates.csv")
    return report
