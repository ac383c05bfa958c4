"""Time discretization: Caputo L1 weights, state and adjoint marches.

For gamma = 1 the step operator is backward Euler; for gamma in (0, 1) it is
the L1 scheme with weights a_j = (j+1)^{1-gamma} - j^{1-gamma}. Only trace
values enter the fractional memory, so the marches keep the full cylinder
field of the current step only. The backward (adjoint) march applies the
same scheme to the time-reversed sequence; algebraically this is the exact
transpose of the forward march, which is what makes the discrete duality
identity hold to machine precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (OmegaQuadrature, assemble_stiffness, control_load_matrix,
                       omega_matrices, omega_quadrature, time_average)
from .mesh import CylinderMesh
from .problem import FractionalParams, ParameterError, ProblemData, TimeGrid


class UseDelta1Error(ParameterError):
    """Raised when L1 weights are requested for gamma outside (0, 1)."""


@dataclass(frozen=True)
class CaputoWeights:
    """L1 weights a_j = (j+1)^{1-gamma} - j^{1-gamma}, j = 0..K-1.

    ``scale`` is 1/(Gamma(2-gamma) tau^gamma); the weights are positive,
    strictly decreasing from a_0 = 1, and telescope so that
    sum_{j<k}(a_j - a_{j+1}) + a_k = 1 for every k.
    """

    gamma: float
    a: np.ndarray
    scale: float

    @property
    def diffs(self) -> np.ndarray:
        """a_j - a_{j+1} for j = 0..K-2."""
        return self.a[:-1] - self.a[1:]


def caputo_weights(gamma: float, K: int, tau: float) -> CaputoWeights:
    if not 0.0 < gamma < 1.0:
        raise UseDelta1Error(
            f"gamma = {gamma} is outside (0, 1); use the classical difference delta^1")
    if K < 1 or tau <= 0.0:
        raise ParameterError(f"invalid time grid: K = {K}, tau = {tau}")
    j = np.arange(K, dtype=float)
    a = (j + 1.0) ** (1.0 - gamma) - j ** (1.0 - gamma)
    scale = 1.0 / (math.gamma(2.0 - gamma) * tau ** gamma)
    return CaputoWeights(gamma=gamma, a=a, scale=scale)


def apply_discrete_caputo(weights: CaputoWeights, history: np.ndarray):
    """Affine decomposition of the L1 operator at the next step.

    ``history`` holds phi^0..phi^k along its first axis. Returns
    (c_new, h_known) such that delta^gamma phi^{k+1} = c_new * phi^{k+1} -
    h_known, with c_new = 1/(Gamma(2-gamma) tau^gamma).
    """
    history = np.asarray(history, dtype=float)
    if history.shape[0] < 1:
        raise ParameterError("empty history: need at least phi^0")
    k = history.shape[0] - 1
    acc = weights.a[k] * history[0]
    if k >= 1:
        d = weights.diffs[:k]
        # sum_j d_j phi^{k-j} pairs d_0..d_{k-1} with phi^k..phi^1
        acc = acc + np.tensordot(d, history[k:0:-1], axes=(0, 0))
    return weights.scale, weights.scale * acc


class CylinderSystem:
    """Assembled operators and factorizations for one (mesh, params, grid).

    The per-step matrix c_new*M_tr + A is constant because the time step is
    uniform, so it is factorized once and reused across steps, both marches
    and every optimizer iteration.
    """

    def __init__(self, mesh: CylinderMesh, params: FractionalParams,
                 grid: TimeGrid, reaction: float = 0.0):
        self.mesh = mesh
        self.params = params
        self.grid = grid
        self.reaction = reaction

        self.A_free = assemble_stiffness(mesh, params, c=reaction)
        m_w, _ = omega_matrices(mesh.omega)
        interior = mesh.omega.interior_idx
        self.M_int = m_w[interior][:, interior].tocsr()
        self.quad = omega_quadrature(mesh.omega)
        self.B = control_load_matrix(mesh.omega)
        self.B_int = self.B[interior].tocsr()
        self.interior = interior
        self.tpos = mesh.trace_free_pos

        if params.gamma >= 1.0:
            self.weights = None
            self.c_new = 1.0 / grid.tau
        else:
            self.weights = caputo_weights(params.gamma, grid.K, grid.tau)
            self.c_new = self.weights.scale

        nf = mesh.n_free
        n_int = interior.size
        embed = sp.csr_matrix((np.ones(n_int), (self.tpos, np.arange(n_int))),
                              shape=(nf, n_int))
        self._embed = embed
        M_emb = (embed @ self.M_int @ embed.T).tocsc()
        self._step_solve = spla.factorized((self.A_free + self.c_new * M_emb).tocsc())
        self._init_solve = None

    @property
    def n_interior(self) -> int:
        return self.interior.size

    def _solve_with_trace_rhs(self, rhs_int: np.ndarray) -> np.ndarray:
        rhs = np.zeros(self.mesh.n_free)
        rhs[self.tpos] = rhs_int
        return self._step_solve(rhs)

    def initial_field(self, u0) -> np.ndarray:
        """Discrete weighted-harmonic extension of u0, as a free-node vector.

        Trace nodes carry the nodal values of u0; the remaining free nodes
        solve a_Y(V0, W) = 0 against all test functions vanishing at y = 0.
        """
        mesh = self.mesh
        u0v = np.asarray(u0(mesh.omega.vertices[self.interior]), dtype=float)
        nf = mesh.n_free
        upos = np.setdiff1d(np.arange(nf), self.tpos)
        if self._init_solve is None:
            A_uu = self.A_free[upos][:, upos].tocsc()
            self._init_solve = (upos, self.A_free[upos][:, self.tpos].tocsr(),
                                spla.factorized(A_uu))
        upos, A_ut, solve = self._init_solve
        v = np.zeros(nf)
        v[self.tpos] = u0v
        v[upos] = solve(-(A_ut @ u0v))
        return v

    def energy(self, v_free: np.ndarray) -> float:
        """a_Y(v, v) of a free-node coefficient vector."""
        return float(v_free @ (self.A_free @ v_free))


def initialize_state(u0, mesh: CylinderMesh, stiffness: sp.spmatrix) -> np.ndarray:
    """Discrete extension of u0 as a full-node coefficient vector.

    Solves the interior block of the given free-node stiffness with the
    nodal values of u0 as trace data; Dirichlet nodes are zero.
    """
    interior = mesh.omega.interior_idx
    u0v = np.asarray(u0(mesh.omega.vertices[interior]), dtype=float)
    nf = mesh.n_free
    tpos = mesh.trace_free_pos
    upos = np.setdiff1d(np.arange(nf), tpos)
    A = stiffness.tocsr()
    vfree = np.zeros(nf)
    vfree[tpos] = u0v
    vfree[upos] = spla.spsolve(A[upos][:, upos].tocsc(), -(A[upos][:, tpos] @ u0v))
    full = np.zeros(mesh.n_nodes)
    full[mesh.free_idx] = vfree
    return full


@dataclass
class StateTrajectory:
    """Trace history of the discrete state, steps 0..K.

    ``traces`` holds the values at the interior Omega vertices; the trace
    function is zero on the boundary ones. ``fields`` optionally keeps the
    full free-node field of every step.
    """

    traces: np.ndarray            # (K+1, n_interior)
    grid: TimeGrid
    fields: np.ndarray | None = None

    def trace_coeffs(self, k: int, mesh: CylinderMesh) -> np.ndarray:
        """Coefficients over all Omega vertices at step k (zeros on boundary)."""
        full = np.zeros(mesh.omega.n_vertices)
        full[mesh.omega.interior_idx] = self.traces[k]
        return full


@dataclass
class AdjointTrajectory:
    """Trace history of the discrete adjoint, steps 0..K; entry K is zero."""

    traces: np.ndarray            # (K+1, n_interior)
    grid: TimeGrid


def state_march(system: CylinderSystem, trace0: np.ndarray,
                loads: np.ndarray, keep_fields: bool = False) -> StateTrajectory:
    """Forward march: loads[k] is the trace-interior load of step k+1."""
    K = system.grid.K
    n_int = system.n_interior
    if loads.shape != (K, n_int):
        raise ParameterError(f"loads must have shape {(K, n_int)}, got {loads.shape}")
    traces = np.empty((K + 1, n_int))
    traces[0] = trace0
    fields = np.zeros((K + 1, system.mesh.n_free)) if keep_fields else None
    w = system.weights
    for k in range(K):
        if w is None:
            hist = system.c_new * (system.M_int @ traces[k])
        else:
            acc = w.a[k] * traces[0]
            if k >= 1:
                acc = acc + np.tensordot(w.diffs[:k], traces[k:0:-1], axes=(0, 0))
            hist = system.c_new * (system.M_int @ acc)
        v = system._solve_with_trace_rhs(hist + loads[k])
        traces[k + 1] = v[system.tpos]
        if keep_fields:
            fields[k + 1] = v
    return StateTrajectory(traces=traces, grid=system.grid, fields=fields)


def adjoint_march(system: CylinderSystem, loads: np.ndarray) -> AdjointTrajectory:
    """Backward march with terminal value zero; loads[j] drives step j.

    This is the L1 (or backward Euler) scheme applied to the time-reversed
    sequence, i.e. the exact transpose of :func:`state_march`.
    """
    K = system.grid.K
    n_int = system.n_interior
    if loads.shape != (K, n_int):
        raise ParameterError(f"loads must have shape {(K, n_int)}, got {loads.shape}")
    traces = np.zeros((K + 1, n_int))
    w = system.weights
    for j in range(K - 1, -1, -1):
        if w is None:
            hist = system.c_new * (system.M_int @ traces[j + 1])
        else:
            nmem = K - 1 - j
            if nmem >= 1:
                acc = np.tensordot(w.diffs[:nmem], traces[j + 1:K], axes=(0, 0))
                hist = system.c_new * (system.M_int @ acc)
            else:
                hist = np.zeros(n_int)
        v = system._solve_with_trace_rhs(hist + loads[j])
        traces[j] = v[system.tpos]
    return AdjointTrajectory(traces=traces, grid=system.grid)


def forcing_loads(f, grid: TimeGrid, mesh: CylinderMesh,
                  quad: OmegaQuadrature, interior: np.ndarray) -> np.ndarray:
    """Interior-node loads of the step averages f^{k+1}, k = 0..K-1."""
    K = grid.K
    tau = grid.tau
    out = np.empty((K, interior.size))
    scatter = quad.scatter
    for k in range(K):
        fbar = time_average(f, quad.points, k * tau, (k + 1) * tau)
        out[k] = (scatter @ fbar)[interior]
    return out


def solve_state(data: ProblemData, params: FractionalParams, mesh: CylinderMesh,
                grid: TimeGrid, control=None, system: CylinderSystem | None = None,
                keep_fields: bool = False) -> StateTrajectory:
    """Fully discrete state solve for given data and (optional) control.

    ``control`` may be a ControlField or a plain (K, n_cells) array; it adds
    B Z^{k+1} to the load of every step.
    """
    if system is None:
        system = CylinderSystem(mesh, params, grid, reaction=data.reaction)
    loads = forcing_loads(data.forcing, grid, mesh, system.quad, system.interior)
    if control is not None:
        zvals = np.asarray(getattr(control, "values", control), dtype=float)
        if zvals.shape != (grid.K, mesh.omega.n_cells):
            raise ParameterError(
                f"control must have shape {(grid.K, mesh.omega.n_cells)}, got {zvals.shape}")
        loads = loads + (system.B_int @ zvals.T).T
    v0 = system.initial_field(data.initial)
    traj = state_march(system, v0[system.tpos], loads, keep_fields=keep_fields)
    if keep_fields:
        traj.fields[0] = v0
    return traj


def tracking_loads(state: StateTrajectory, u_d, grid: TimeGrid,
                   system: CylinderSystem) -> np.ndarray:
    """Adjoint loads M tr V^{k+1} - <u_d^{k+1}, phi_i> for k = 0..K-1."""
    b_ud = forcing_loads(u_d, grid, system.mesh, system.quad, system.interior)
    return (system.M_int @ state.traces[1:].T).T - b_ud


def solve_adjoint(state: StateTrajectory, u_d, params: FractionalParams,
                  mesh: CylinderMesh, grid: TimeGrid,
                  system: CylinderSystem | None = None) -> AdjointTrajectory:
    """Discrete adjoint driven by the tracking residual of ``state``."""
    if system is None:
        system = CylinderSystem(mesh, params, grid)
    return adjoint_march(system, tracking_loads(state, u_d, grid, system))


def lambda_diagnostic(trace_sq, gamma: float, grid: TimeGrid,
                      forcing_sq=None) -> float:
    """Discrete stability functional Lambda_gamma^2.

    ``trace_sq`` holds the squared L2(Omega) norms of the trace at steps
    0..K; the fractional integral I^{1-gamma} of the piecewise-constant
    interpolant (value of step k on (t_{k-1}, t_k]) is evaluated at T by
    exact integration of the kernel over each step. ``forcing_sq`` holds
    per-step squared norms of the forcing (steps 1..K) and contributes the
    l2 sum tau * sum forcing_sq.
    """
    trace_sq = np.asarray(trace_sq, dtype=float)
    K = trace_sq.size - 1
    if K != grid.K:
        raise ParameterError(f"history length {trace_sq.size} does not match K = {grid.K}")
    if gamma >= 1.0:
        value = trace_sq[-1]
    else:
        sigma = 1.0 - gamma
        t = grid.nodes
        kernel = ((grid.T - t[:-1]) ** sigma - (grid.T - t[1:]) ** sigma)
        value = float(kernel @ trace_sq[1:]) / math.gamma(2.0 - gamma)
    if forcing_sq is not None:
        value += grid.tau * float(np.sum(forcing_sq))
    return value
