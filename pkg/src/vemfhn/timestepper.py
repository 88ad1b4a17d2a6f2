"""Backward Euler in time with a Picard loop for the nonlinear and nonlocal terms.

Each time step solves, for the unknowns ``(v, w)`` at ``t_n``,

    M (v - v_prev) / dt + D(J(v)) A v + b(v, w) = F(t_n)
    M (w - w_prev) / dt - c(v, w) = 0

by fixed-point iteration.  Every inner solve is symmetric positive definite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .assembly import (FieldState, MeshOperators, assemble_applied_current, assemble_global,
                       assemble_reaction, build_mesh_operators, interpolate)
from .errors import SolverError, StepFailure
from .mesh import PolygonalMesh
from .model import FitzHughNagumo

__all__ = [
    "TimeGrid",
    "PicardConfig",
    "LinearSolverConfig",
    "LinearSolveStats",
    "StepDiagnostics",
    "Trajectory",
    "Discretization",
    "solve_spd",
    "step",
    "run",
    "initial_state",
]


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("final time T must be positive")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("number of steps N must be a non-negative integer")

    @property
    def dt(self) -> float:
        if self.N == 0:
            return math.inf
        return self.T / self.N

    def time(self, n: int) -> float:
        """``t_n``, computed as ``n * T / N`` to avoid accumulated drift."""
        return self.T if n == self.N else n * self.T / self.N


@dataclass(frozen=True)
class PicardConfig:
    """Fixed-point iteration settings.

    ``shift="lumped"`` adds ``diag(m_i * max(0, dI/dv(v_i)))`` to both sides
    of the potential solve.  The term cancels at the fixed point, so the
    converged step is unchanged, but the iteration stays contractive for
    stiff kinetics.  ``shift="none"`` lags the ionic vector as is.
    """

    tol: float = 1e-8
    max_iters: int = 50
    damping: float = 1.0
    shift: str = "lumped"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("picard.tol must be positive")
        if self.max_iters < 1:
            raise ValueError("picard.max_iters must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("picard.damping must lie in (0, 1]")
        if self.shift not in ("lumped", "none"):
            raise ValueError("picard.shift must be 'lumped' or 'none'")


@dataclass(frozen=True)
class LinearSolverConfig:
    tol: float = 1e-10
    max_iters: int = 2000


@dataclass(frozen=True)
class LinearSolveStats:
    iterations: int
    residual: float


def solve_spd(matrix, rhs, tol: float = 1e-10, max_iters: int = 2000, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, LinearSolveStats)`` with the true relative residual
    ``||b - A x|| / ||b||``; raises :class:`SolverError` when it stays above
    ``tol`` after ``max_iters`` iterations.
    """
    A = sp.csr_matrix(matrix) if not sp.issparse(matrix) else matrix
    b = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), LinearSolveStats(0, 0.0)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has a non-positive diagonal entry; not SPD")
    inv_diag = 1.0 / diag
    precond = sp.linalg.LinearOperator(A.shape, matvec=lambda r: inv_diag * r, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    rel = np.linalg.norm(b - A @ x) / bnorm
    # a few restarts absorb drift between recursive and true residuals
    for _ in range(4):
        if rel <= tol or count[0] >= max_iters:
            break
        x, _info = cg(A, b, x0=x, rtol=0.5 * tol, atol=0.0, maxiter=max_iters - count[0],
                      M=precond, callback=cb)
        rel = np.linalg.norm(b - A @ x) / bnorm
    stats = LinearSolveStats(count[0], float(rel))
    if not rel <= tol:
        raise SolverError(f"CG stopped at relative residual {rel:.3e} after {count[0]} iterations",
                          stats)
    return x, stats


@dataclass
class Discretization:
    """Mesh, element operators and assembled global matrices for one model."""

    mesh: PolygonalMesh
    model: FitzHughNagumo
    ops: MeshOperators
    A: sp.csr_matrix
    M: sp.csr_matrix

    @classmethod
    def build(cls, mesh: PolygonalMesh, model: FitzHughNagumo, backend: str | None = None):
        ops = build_mesh_operators(mesh, backend=backend)
        A, M = assemble_global(mesh, ops)
        return cls(mesh, model, ops, A, M)

    @property
    def lumped(self) -> np.ndarray:
        return np.maximum(self.ops.basis_weights, 0.0)

    def J(self, v) -> float:
        return float(self.ops.basis_weights @ v)

    def mass_norm(self, x) -> float:
        return float(math.sqrt(max(x @ (self.M @ x), 0.0)))

    def stiffness_energy(self, x) -> float:
        return float(x @ (self.A @ x))


def initial_state(disc: Discretization) -> FieldState:
    """Vertex interpolation of the model's initial data."""
    init = disc.model.initial
    return FieldState(interpolate(disc.mesh, init.v0), interpolate(disc.mesh, init.w0), 0.0)


@dataclass
class StepDiagnostics:
    t: float
    J: float
    D: float
    picard_iterations: int
    increments: list = field(default_factory=list)
    linear_stats: list = field(default_factory=list)


def _rel_increment(new, old):
    return float(np.max(np.abs(new - old)) / max(1.0, float(np.max(np.abs(new)))))


def step(state: FieldState, dt: float, disc: Discretization, picard: PicardConfig = PicardConfig(),
         linsolve: LinearSolverConfig = LinearSolverConfig(), t_new: float | None = None):
    """Advance one backward Euler step; returns ``(new_state, StepDiagnostics)``.

    ``t_new`` defaults to ``state.t + dt``; the applied current is evaluated
    there.
    """
    M, A, model = disc.M, disc.A, disc.model
    kin = model.kinetics
    if t_new is None:
        t_new = state.t + dt
    inv_dt = 1.0 / dt
    rhs_v0 = inv_dt * (M @ state.v) + assemble_applied_current(t_new, disc.mesh, disc.ops, model)
    rhs_w0 = inv_dt * (M @ state.w)
    M_dt = (inv_dt * M).tocsr()
    lumped = disc.lumped
    v_s, w_s = state.v.copy(), state.w.copy()
    diag = StepDiagnostics(t_new, 0.0, 0.0, 0)
    omega = picard.damping
    for it in range(1, picard.max_iters + 1):
        J = disc.J(v_s)
        D = model.diffusion(J)
        b, _ = assemble_reaction(FieldState(v_s, w_s), disc.mesh, disc.ops, model)
        rhs = rhs_v0 - b
        K = M_dt + D * A
        if picard.shift == "lumped":
            sig = lumped * np.maximum(kin.ionic_dv(v_s), 0.0)
            K = K + sp.diags(sig, format="csr")
            rhs = rhs + sig * v_s
        # solve for the correction so the residual tolerance is relative to
        # the defect rather than to the (much larger) right-hand side
        try:
            dv, st_v = solve_spd(K, rhs - K @ v_s, linsolve.tol, linsolve.max_iters)
        except SolverError as exc:
            raise SolverError(f"potential solve failed at t={t_new:.6g}: {exc}", exc.stats) from exc
        v_new = v_s + omega * dv
        _, c = assemble_reaction(FieldState(v_new, w_s), disc.mesh, disc.ops, model)
        try:
            dw, st_w = solve_spd(M_dt, rhs_w0 + c - M_dt @ w_s, linsolve.tol, linsolve.max_iters)
        except SolverError as exc:
            raise SolverError(f"gating solve failed at t={t_new:.6g}: {exc}", exc.stats) from exc
        w_new = w_s + omega * dw
        inc = max(_rel_increment(v_new, v_s), _rel_increment(w_new, w_s))
        diag.increments.append(inc)
        diag.linear_stats.append((st_v, st_w))
        v_s, w_s = v_new, w_new
        if not (np.isfinite(v_s).all() and np.isfinite(w_s).all()):
            break
        if inc <= picard.tol:
            diag.picard_iterations = it
            diag.J = disc.J(v_s)
            diag.D = model.diffusion(diag.J)
            return FieldState(v_s, w_s, t_new), diag
    last = FieldState.__new__(FieldState)
    last.v, last.w, last.t = v_s, w_s, t_new
    raise StepFailure(f"Picard iteration did not converge at t={t_new:.6g} "
                      f"(last increment {diag.increments[-1]:.3e})", last, diag.increments)


@dataclass
class Trajectory:
    """Snapshots and per-step energy log of one run."""

    snapshot_steps: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    log: dict = field(default_factory=lambda: {k: [] for k in (
        "step", "t", "J", "D", "picard_iterations", "norm_v", "norm_w", "cumulative_grad")})
    diagnostics: list = field(default_factory=list)
    final: FieldState | None = None

    def record(self, n, state, disc, picard_iterations, cumulative):
        J = disc.J(state.v)
        lg = self.log
        lg["step"].append(n)
        lg["t"].append(state.t)
        lg["J"].append(J)
        lg["D"].append(disc.model.diffusion(J))
        lg["picard_iterations"].append(picard_iterations)
        lg["norm_v"].append(disc.mass_norm(state.v))
        lg["norm_w"].append(disc.mass_norm(state.w))
        lg["cumulative_grad"].append(cumulative)

    def energy_array(self, key) -> np.ndarray:
        return np.asarray(self.log[key], dtype=float)

    @property
    def max_energy(self) -> float:
        return float(np.max(self.energy_array("norm_v") + self.energy_array("norm_w")))


def _snapshot_steps(grid: TimeGrid, stride: int | None, times) -> set:
    steps = {0, grid.N}
    if stride:
        steps.update(range(0, grid.N + 1, int(stride)))
    if times is not None:
        for t in times:
            if t < -1e-12 or t > grid.T + 1e-12:
                continue
            n = int(round(t / grid.dt)) if grid.N else 0
            steps.add(min(max(n, 0), grid.N))
    return steps


def run(state0: FieldState, grid: TimeGrid, disc: Discretization,
        picard: PicardConfig = PicardConfig(), linsolve: LinearSolverConfig = LinearSolverConfig(),
        stride: int | None = None, snapshot_times=None,
        on_snapshot: Callable[[int, FieldState], None] | None = None,
        keep_snapshots: bool = True, on_step: Callable | None = None) -> Trajectory:
    """Advance ``grid.N`` steps from ``state0``.

    Snapshots are taken at step 0, the final step, every ``stride`` steps
    and at the steps nearest to ``snapshot_times``; each is passed to
    ``on_snapshot``.  On failure the partial trajectory is attached to the
    raised :class:`StepFailure`.
    """
    traj = Trajectory()
    want = _snapshot_steps(grid, stride, snapshot_times)
    state = FieldState(state0.v.copy(), state0.w.copy(), 0.0)
    cumulative = 0.0

    def emit(n, s):
        if n in want:
            traj.snapshot_steps.append(n)
            if keep_snapshots:
                traj.snapshots.append(s.copy())
            if on_snapshot is not None:
                on_snapshot(n, s)

    traj.record(0, state, disc, 0, cumulative)
    emit(0, state)
    dt = grid.dt
    for n in range(1, grid.N + 1):
        try:
            new, diag = step(state, dt, disc, picard, linsolve, t_new=grid.time(n))
        except StepFailure as exc:
            traj.final = state
            exc.trajectory = traj
            raise
        state = new
        cumulative += dt * disc.stiffness_energy(state.v)
        traj.diagnostics.append(diag)
        traj.record(n, state, disc, diag.picard_iterations, cumulative)
        emit(n, state)
        if on_step is not None:
            on_step(n, state, diag)
    traj.final = state
    return traj
