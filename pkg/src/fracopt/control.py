"""Discrete controls, reduced cost/gradient, and the projected quasi-Newton loop.

Controls are piecewise constant on the space-time cells (t_{k-1}, t_k] x K.
The reduced gradient is derived from the discrete adjoint, so cost and
gradient are consistent to machine precision: the representative of the
tracking derivative on step k is the cell average of the adjoint trace at
index k-1 (the adjoint sequence read in reversed time).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import omega_quadrature, time_average
from .evolution import (AdjointTrajectory, CylinderSystem, StateTrajectory,
                        adjoint_march, forcing_loads, state_march)
from .mesh import OmegaMesh, CylinderMesh
from .problem import ControlBounds, FractionalParams, ParameterError, ProblemData, TimeGrid


@dataclass
class ControlField:
    """Piecewise-constant control: values[k][cell] on (t_k, t_{k+1}] x cell."""

    values: np.ndarray             # (K, n_cells)
    bounds: ControlBounds
    grid: TimeGrid
    omega: OmegaMesh

    def clamped(self) -> "ControlField":
        return ControlField(values=clamp(self.values, self.bounds.a, self.bounds.b),
                            bounds=self.bounds, grid=self.grid, omega=self.omega)

    def is_admissible(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.values >= self.bounds.a - tol)
                    and np.all(self.values <= self.bounds.b + tol))


def clamp(values, a: float, b: float) -> np.ndarray:
    """Entrywise max(a, min(b, v))."""
    if a > b:
        raise ParameterError(f"bounds out of order: a = {a} > b = {b}")
    return np.minimum(b, np.maximum(a, np.asarray(values, dtype=float)))


def control_norm(values: np.ndarray, grid: TimeGrid, omega: OmegaMesh) -> float:
    """l2(L2) norm of a piecewise-constant field: sqrt(sum tau |cell| v^2)."""
    w = grid.tau * omega.cell_volume
    return math.sqrt(w * float(np.sum(np.square(values))))


def l2_project(r, grid: TimeGrid, omega: OmegaMesh, bounds: ControlBounds | None = None,
               quad=None) -> np.ndarray:
    """L2(Q)-orthogonal projection of an evaluable onto piecewise constants.

    Values are the exact means over each space-time cell, computed with the
    3-point tensor Gauss rule per cell and the 2-point rule per step.
    """
    if quad is None:
        quad = omega_quadrature(omega)
    K = grid.K
    tau = grid.tau
    ncells = omega.n_cells
    vol = omega.cell_volume
    out = np.empty((K, ncells))
    for k in range(K):
        vals = time_average(r, quad.points, k * tau, (k + 1) * tau)
        cellsums = np.bincount(quad.cell_of, weights=quad.weights * vals,
                               minlength=ncells)
        out[k] = cellsums / vol
    return out


def project_trace(trace_int: np.ndarray, system: CylinderSystem) -> np.ndarray:
    """Cell means of the piecewise-linear trace function, integrated exactly."""
    vol = system.mesh.omega.cell_volume
    return (system.B_int.T @ trace_int) / vol


class ReducedProblem:
    """Reduced cost of the discrete control problem with precomputed data.

    Assembles the forcing and desired-state step averages once; every cost
    or gradient evaluation then costs one state (plus one adjoint) march
    with the cached factorization.
    """

    def __init__(self, data: ProblemData, params: FractionalParams,
                 mesh: CylinderMesh, grid: TimeGrid,
                 system: CylinderSystem | None = None):
        self.data = data
        self.params = params
        self.mesh = mesh
        self.grid = grid
        self.system = system or CylinderSystem(mesh, params, grid, reaction=data.reaction)
        sysm = self.system
        self.bounds = data.bounds
        self.mu = data.bounds.mu
        self.cell_volume = mesh.omega.cell_volume
        self.weight = grid.tau * self.cell_volume

        self.b_f = forcing_loads(data.forcing, grid, mesh, sysm.quad, sysm.interior)
        self.b_ud = forcing_loads(data.desired_state, grid, mesh, sysm.quad, sysm.interior)
        # constant term int (u_d^k)^2 with the same quadrature
        K, tau = grid.K, grid.tau
        self.c_ud = np.empty(K)
        for k in range(K):
            vals = time_average(data.desired_state, sysm.quad.points, k * tau, (k + 1) * tau)
            self.c_ud[k] = float(sysm.quad.weights @ np.square(vals))
        self.trace0 = sysm.initial_field(data.initial)[sysm.tpos]

    def new_control(self, values=None) -> ControlField:
        if values is None:
            values = np.zeros((self.grid.K, self.mesh.omega.n_cells))
        return ControlField(values=np.asarray(values, dtype=float),
                            bounds=self.bounds, grid=self.grid, omega=self.mesh.omega)

    def state(self, zvals: np.ndarray) -> StateTrajectory:
        loads = self.b_f + (self.system.B_int @ zvals.T).T
        return state_march(self.system, self.trace0, loads)

    def adjoint(self, state: StateTrajectory) -> AdjointTrajectory:
        loads = (self.system.M_int @ state.traces[1:].T).T - self.b_ud
        return adjoint_march(self.system, loads)

    def cost_of_state(self, state: StateTrajectory, zvals: np.ndarray) -> float:
        tr = state.traces[1:]
        track = float(np.einsum("ki,ki->", tr, (self.system.M_int @ tr.T).T)
                      - 2.0 * np.einsum("ki,ki->", tr, self.b_ud) + np.sum(self.c_ud))
        reg = self.cell_volume * float(np.sum(np.square(zvals)))
        return 0.5 * self.grid.tau * track + 0.5 * self.mu * self.grid.tau * reg

    def cost(self, zvals: np.ndarray) -> float:
        return self.cost_of_state(self.state(zvals), zvals)

    def cost_and_gradient(self, zvals: np.ndarray):
        state = self.state(zvals)
        cost = self.cost_of_state(state, zvals)
        adj = self.adjoint(state)
        grad = self.mu * zvals + (self.system.B_int.T @ adj.traces[:-1].T).T / self.cell_volume
        return cost, grad, state, adj


def reduced_cost(control: ControlField, prob: ReducedProblem) -> float:
    """J(S z, z) = 1/2 ||tr V - u_d||^2_{l2(L2)} + mu/2 ||z||^2_{l2(L2)}."""
    return prob.cost(np.asarray(control.values, dtype=float))


def reduced_gradient(control: ControlField, prob: ReducedProblem) -> np.ndarray:
    """Riesz representative mu z + Pi(tr P) of the reduced derivative."""
    _, grad, _, _ = prob.cost_and_gradient(np.asarray(control.values, dtype=float))
    return grad


def vi_residual(control: ControlField, p_cell_means: np.ndarray) -> float:
    """Distance of z from the projection-formula fixed point.

    Returns ||z - clamp(-Pi(tr p)/mu, a, b)||_{l2(L2)}; zero exactly when the
    discrete variational inequality holds cellwise.
    """
    b = control.bounds
    target = clamp(-p_cell_means / b.mu, b.a, b.b)
    return control_norm(control.values - target, control.grid, control.omega)


@dataclass
class OptimizeResult:
    """Outcome of the projected quasi-Newton iteration."""

    control: ControlField
    cost: float
    pg_history: list
    iterations: int
    converged: bool
    state: StateTrajectory | None = None
    adjoint: AdjointTrajectory | None = None
    cost_history: list = field(default_factory=list)

    @property
    def pg_norm(self) -> float:
        return self.pg_history[-1] if self.pg_history else math.inf


def _two_loop(g: np.ndarray, pairs, inv_seed: float, dot) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y in reversed(pairs):
        rho = 1.0 / dot(y, s)
        a = rho * dot(s, q)
        alphas.append((a, rho, s, y))
        q -= a * y
    q *= inv_seed
    for a, rho, s, y in reversed(alphas):
        b = rho * dot(y, q)
        q += (a - b) * s
    return q


def projected_bfgs(fun_and_grad, z0: np.ndarray, bounds: ControlBounds,
                   weight: float, tol: float = 1e-9, max_iter: int = 400,
                   memory: int = 10, seed: float | None = None,
                   callback=None) -> dict:
    """Projected limited-memory BFGS with Armijo backtracking.

    ``fun_and_grad(z) -> (f, g)`` with g the Riesz representative in the
    weighted inner product <u, v> = weight * sum(u v). Iterates are clamped
    to the box; bound-active coordinates whose gradient points outward get
    the steepest-descent direction while the quasi-Newton model acts on the
    rest. Terminates when ||z - clamp(z - g)|| <= tol. The inverse Hessian
    seed is 1/seed (seed defaults to the regularization weight mu, the exact
    Hessian of the penalty term).
    """
    if isinstance(z0, ControlField):
        z0 = z0.values
    a, b = bounds.a, bounds.b
    if seed is None:
        seed = bounds.mu
    dot = lambda u, v: weight * float(np.sum(u * v))
    nrm = lambda u: math.sqrt(max(dot(u, u), 0.0))

    z = clamp(z0, a, b)
    f, g = fun_and_grad(z)
    pairs: list = []
    pg_history = []
    cost_history = [f]
    n_iter = 0
    converged = False
    c1 = 1e-4

    for n_iter in range(1, max_iter + 1):
        pg = z - clamp(z - g, a, b)
        pg_norm = nrm(pg)
        pg_history.append(pg_norm)
        if callback is not None:
            callback(n_iter, z, f, pg_norm)
        if pg_norm <= tol:
            converged = True
            break

        active = ((z <= a) & (g > 0.0)) | ((z >= b) & (g < 0.0))
        free = ~active
        gf = np.where(free, g, 0.0)
        masked = [(np.where(free, s, 0.0), np.where(free, y, 0.0)) for s, y in pairs]
        masked = [(s, y) for s, y in masked if dot(y, s) > 1e-14 * nrm(y) * nrm(s)]
        if masked:
            # curvature-scaled seed once pairs exist; mu-seed bootstraps
            s_l, y_l = masked[-1]
            inv_seed = dot(s_l, y_l) / dot(y_l, y_l)
            d = -_two_loop(gf, masked, inv_seed, dot)
        else:
            d = -gf / seed
        if dot(d, gf) > 0.0:
            d = -gf / seed
        d = np.where(free, d, -g / seed)

        # Armijo backtracking on the projected path, with a roundoff
        # allowance so decrease can be certified near the noise floor of f.
        alpha = 1.0
        accepted = False
        allowance = 8.0 * np.finfo(float).eps * (abs(f) + 1e-300)
        for _ in range(40):
            z_trial = clamp(z + alpha * d, a, b)
            step = z_trial - z
            decrement = dot(g, step)
            if decrement >= 0.0:
                alpha *= 0.5
                continue
            f_trial, g_trial = fun_and_grad(z_trial)
            if f_trial <= f + c1 * decrement + allowance:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break

        s_vec = z_trial - z
        y_vec = g_trial - g
        if dot(y_vec, s_vec) > 1e-14 * nrm(y_vec) * nrm(s_vec):
            pairs.append((s_vec, y_vec))
            if len(pairs) > memory:
                pairs.pop(0)
        z, f, g = z_trial, f_trial, g_trial
        cost_history.append(f)
    else:
        n_iter = max_iter

    if not converged:
        pg = z - clamp(z - g, a, b)
        pg_history.append(nrm(pg))
        converged = pg_history[-1] <= tol
    return {"z": z, "f": f, "g": g, "pg_history": pg_history,
            "iterations": n_iter, "converged": converged,
            "cost_history": cost_history}


def solve_control_problem(data: ProblemData, params: FractionalParams,
                          mesh: CylinderMesh, grid: TimeGrid,
                          z0: np.ndarray | None = None, tol: float = 1e-9,
                          max_iter: int = 400,
                          prob: ReducedProblem | None = None) -> OptimizeResult:
    """Minimize the reduced cost over the discrete admissible set."""
    if prob is None:
        prob = ReducedProblem(data, params, mesh, grid)
    if z0 is None:
        z0 = np.zeros((grid.K, mesh.omega.n_cells))

    cache = {}

    def fun_and_grad(z):
        f, g, state, adj = prob.cost_and_gradient(z)
        cache["state"], cache["adjoint"] = state, adj
        return f, g

    raw = projected_bfgs(fun_and_grad, z0, data.bounds, prob.weight,
                         tol=tol, max_iter=max_iter, seed=data.bounds.mu)
    # refresh state/adjoint at the final iterate
    f_final, g_final, state, adj = prob.cost_and_gradient(raw["z"])
    zopt = prob.new_control(raw["z"])
    return OptimizeResult(control=zopt, cost=f_final, pg_history=raw["pg_history"],
                          iterations=raw["iterations"], converged=raw["converged"],
                          state=state, adjoint=adj, cost_history=raw["cost_history"])
