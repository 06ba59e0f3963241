"""Time stepping for the microscopic two-fluid poroelastic model.

Pressure is eliminated through the continuity laws (deviation form
p - p0 = -c^2 div w), which turns every implicit-Euler step into one
symmetric positive definite solve for the velocity:

    [eps^2 mu chi^eps + tau lam (1-chi^eps)] D(v):D(phi)
        + tau c^2 (div v)(div phi)
  = -grad p0_drive . phi  - p0 (n . phi)|_{S1 u S2}
        - lam (1-chi^eps) D(w^n):D(phi) - c^2 (div w^n)(div phi)

with w^{n+1} = w^n + tau v^{n+1} and homogeneous displacement conditions on
S0.  A per-step energy ledger tracks elastic + compressive storage, viscous
(plus implicit-Euler numerical) dissipation and external work; their balance
is exact up to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import transport
from .geometry import PhaseMask, boundary_tags
from .grid import Grid, ScalarField, VectorField, divergence
from .operators import assemble_vector_form, cell_average, lumped_weights, restrict
from .solvers import CGResult, cg_solve

__all__ = [
    "MaterialParams",
    "SimState",
    "EnergyBreakdown",
    "MicroSolver",
    "pressure_from_displacement",
    "sound_speed_squared",
    "apply_operator",
    "assemble_rhs",
    "cg_solve",
    "step",
    "energy_report",
]


@dataclass(frozen=True)
class MaterialParams:
    mu1: float = 1.0
    mu2: float = 1.0
    lam: float = 1.0
    c_f1: float = 1.0
    c_f2: float = 1.0
    c_s: float = 1.0
    p0: float = 0.0
    p_drive_grad: tuple = (1.0, 0.0)  # constant gradient of the driving field p^0
    epsilon: float = 1.0
    h_mollify: float = 0.1
    tau: float = 0.1
    t_final: float = 1.0

    def __post_init__(self):
        for name in ("mu1", "mu2", "lam", "c_f1", "c_f2", "c_s", "tau"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        m = round(1.0 / self.epsilon)
        if abs(1.0 / self.epsilon - m) > 1e-9:
            raise ValueError("epsilon must be an integer reciprocal")


@dataclass
class SimState:
    w: VectorField
    v: VectorField
    mu: ScalarField
    chi: ScalarField
    t: float = 0.0

    @classmethod
    def initial(cls, mask: PhaseMask, params: MaterialParams) -> "SimState":
        """Zero displacement, viscosity mu_j on the initial fluid-j region."""
        grid = mask.grid
        mu = np.where(mask.chi >= 0.5, params.mu1, params.mu2)
        return cls(
            w=VectorField.zeros(grid),
            v=VectorField.zeros(grid),
            mu=ScalarField(grid, mu),
            chi=ScalarField(grid, mask.chi.copy()),
            t=0.0,
        )

    def copy(self):
        return SimState(self.w.copy(), self.v.copy(), self.mu.copy(), self.chi.copy(), self.t)


@dataclass
class EnergyBreakdown:
    elastic: float = 0.0
    compressive: float = 0.0
    dissipated_cumulative: float = 0.0
    external_work_cumulative: float = 0.0
    balance_residual: float = 0.0


def sound_speed_squared(mask: PhaseMask, params: MaterialParams, chi: np.ndarray | None = None):
    """Node-wise c^2: c_f1 / c_f2 inside the pores by fluid label, c_s on the skeleton."""
    chi = mask.chi if chi is None else chi
    c_fluid = np.where(chi >= 0.5, params.c_f1**2, params.c_f2**2)
    return np.where(mask.chi_eps == 1, c_fluid, params.c_s**2)


def pressure_from_displacement(w: VectorField, mask: PhaseMask, params: MaterialParams,
                               chi: np.ndarray | None = None) -> ScalarField:
    """p = p0 - c^2 div w, so the undeformed state carries the reference pressure."""
    c2 = sound_speed_squared(mask, params, chi)
    return ScalarField(w.grid, params.p0 - c2 * divergence(w).values)


def _surface_load(grid: Grid, p0: float) -> np.ndarray:
    """Natural traction contribution of P<n> = -p0 n over S1 and S2,
    with trapezoidal quadrature in the face coordinates."""
    load = np.zeros((grid.dim,) + grid.shape)
    if p0 == 0.0 or grid.periodic[0]:
        return load.reshape(-1)
    ws = np.ones(grid.shape[1:])
    for k in range(1, grid.dim):
        wk = np.full(grid.n_per_axis, grid.spacing(k))
        if not grid.periodic[k]:
            wk[0] *= 0.5
            wk[-1] *= 0.5
        shape = [1] * (grid.dim - 1)
        shape[k - 1] = grid.n_per_axis
        ws = ws * wk.reshape(shape)
    load[0, -1, ...] = -p0 * ws  # S1, outward normal +e1
    load[0, 0, ...] = +p0 * ws   # S2, outward normal -e1
    return load.reshape(-1)


class MicroSolver:
    """Holds the assembled forms for one (grid, mask, params) instance.

    solver: "cg" (matrix-free style iterations, warm started) or "direct"
    (cached sparse LU, cheap when the viscosity field does not change).
    """

    def __init__(self, mask: PhaseMask, params: MaterialParams, *,
                 advance_transport: bool = True, solver: str = "cg",
                 dirichlet: str = "S0", pin_solid: bool = False,
                 cg_tol: float = 1e-11, cg_max_iter: int = 20000):
        if solver not in ("cg", "direct"):
            raise ValueError(f"unknown solver {solver!r}")
        self.grid = mask.grid
        self.mask = mask
        self.params = params
        self.advance_transport = advance_transport
        self.solver = solver
        self.cg_tol = cg_tol
        self.cg_max_iter = cg_max_iter

        grid = self.grid
        tags = boundary_tags(grid)
        if dirichlet == "S0":
            fixed = tags["S0"]
        elif dirichlet == "S0+S1+S2":
            fixed = tags["S0"] | tags["S1"] | tags["S2"]
        else:
            raise ValueError(f"unknown dirichlet set {dirichlet!r}")
        if pin_solid:
            # Rigid-skeleton regime: isolated inclusions carry no anchoring of
            # their own, so Darcy-type comparisons clamp the solid displacement.
            fixed = fixed | mask.solid
        self.fixed_nodes = fixed
        self.active = np.tile(~fixed.ravel(), grid.dim)

        self.state = SimState.initial(mask, params)
        # The Lame stiffness is restricted to fully solid cells.  A straddling
        # cell has fluid corner nodes whose displacement grows without bound in
        # a through-flow; giving such a cell a fractional elastic coefficient
        # strangles the steady flux instead of converging to Stokes flow.
        solid = cell_average(grid, 1.0 - mask.chi_eps)
        fully_solid = np.where(solid >= 1.0 - 1e-12, 1.0, 0.0)
        self._elastic = assemble_vector_form(grid, params.lam * fully_solid, None)
        self._compressive = assemble_vector_form(
            grid, np.zeros_like(solid),
            cell_average(grid, sound_speed_squared(mask, params)))
        self._E = (self._elastic + self._compressive).tocsr()
        self._viscous = None
        self._mu_cells = None
        self._lu = None
        self._v_warm = None
        self._rebuild_viscous()

        load = np.zeros(grid.dim * grid.n_nodes)
        g = np.asarray(params.p_drive_grad, dtype=float)
        if g.size != grid.dim:
            raise ValueError("p_drive_grad must have one entry per axis")
        wq = lumped_weights(grid)
        for k in range(grid.dim):
            load[k * grid.n_nodes:(k + 1) * grid.n_nodes] = -g[k] * wq
        load += _surface_load(grid, params.p0)
        self.load = load

        self.energy = EnergyBreakdown()
        self.history = []

    # -- operator plumbing --------------------------------------------------

    def _rebuild_viscous(self):
        grid, params = self.grid, self.params
        mu_cells = cell_average(grid, self.state.mu.values * self.mask.chi_eps)
        if self._mu_cells is not None and np.array_equal(mu_cells, self._mu_cells):
            return
        self._mu_cells = mu_cells
        self._viscous = assemble_vector_form(grid, params.epsilon**2 * mu_cells, None)
        self._A = (self._viscous + params.tau * self._E).tocsr()
        self._A_red = restrict(self._A, self.active)
        self._lu = None

    def _compressive_energy_split(self, w_flat):
        e_el = 0.5 * float(w_flat @ (self._elastic @ w_flat))
        e_cp = 0.5 * float(w_flat @ (self._compressive @ w_flat))
        return e_el, e_cp

    def apply_operator(self, v: VectorField) -> VectorField:
        """Constrained action of the per-step SPD operator on a trial velocity."""
        flat = v.values.reshape(-1).copy()
        flat[~self.active] = 0.0
        out = self._A @ flat
        out[~self.active] = 0.0
        return VectorField(self.grid, out.reshape(v.values.shape))

    def assemble_rhs(self) -> VectorField:
        """Driving load minus elastic/compressive restoring force of w^n."""
        rhs = self.load - self._E @ self.state.w.values.reshape(-1)
        rhs[~self.active] = 0.0
        return VectorField(self.grid, rhs.reshape((self.grid.dim,) + self.grid.shape))

    def _solve(self, rhs_red: np.ndarray) -> np.ndarray:
        if self.solver == "direct":
            if self._lu is None:
                self._lu = spla.splu(self._A_red.tocsc())
            return self._lu.solve(rhs_red)
        res = cg_solve(
            self._A_red, rhs_red, tol=self.cg_tol, max_iter=self.cg_max_iter,
            x0=self._v_warm, precond_diag=np.maximum(self._A_red.diagonal(), 1e-300))
        if not res.converged:
            raise RuntimeError(
                f"CG failed to converge: {res.iterations} iterations, residual {res.residual:.3e}")
        self._v_warm = res.x.copy()
        return res.x

    # -- stepping -----------------------------------------------------------

    def step(self) -> SimState:
        grid, params = self.grid, self.params
        self._rebuild_viscous()
        rhs = (self.load - self._E @ self.state.w.values.reshape(-1))[self.active]
        v_red = self._solve(rhs)
        v_flat = np.zeros(grid.dim * grid.n_nodes)
        v_flat[self.active] = v_red

        w_old = self.state.w.values.reshape(-1)
        e_old = 0.5 * float(w_old @ (self._E @ w_old))
        w_new = w_old + params.tau * v_flat
        e_el, e_cp = self._compressive_energy_split(w_new)
        diss = params.tau * float(v_flat @ (self._viscous @ v_flat))
        diss += 0.5 * params.tau**2 * float(v_flat @ (self._E @ v_flat))
        work = params.tau * float(v_flat @ self.load)
        delta_e = (e_el + e_cp) - e_old
        scale = max(abs(delta_e), abs(diss), abs(work), 1e-300)
        residual = abs(delta_e + diss - work) / scale

        self.state.w = VectorField(grid, w_new.reshape((grid.dim,) + grid.shape))
        self.state.v = VectorField(grid, v_flat.reshape((grid.dim,) + grid.shape))
        self.state.t += params.tau
        self.energy = EnergyBreakdown(
            elastic=e_el,
            compressive=e_cp,
            dissipated_cumulative=self.energy.dissipated_cumulative + diss,
            external_work_cumulative=self.energy.external_work_cumulative + work,
            balance_residual=residual,
        )
        self.history.append(
            (self.state.t, e_el, e_cp, self.energy.dissipated_cumulative,
             self.energy.external_work_cumulative, residual))

        if self.advance_transport:
            # splitting order: momentum -> phase -> viscosity (advect + mollify)
            self.state.chi = transport.advect_phase(self.state, self.mask, params.tau)
            self.state.mu = transport.update_viscosity(self.state, self.mask, params)
        return self.state

    def run(self, n_steps: int) -> SimState:
        for _ in range(n_steps):
            self.step()
        return self.state

    def mean_pore_velocity(self) -> np.ndarray:
        """Domain-averaged pore velocity (the micro Darcy flux)."""
        w = self.grid.node_weights() * self.mask.chi_eps
        tot = np.sum(self.grid.node_weights())
        return np.array(
            [float(np.sum(w * self.state.v.values[k])) / tot for k in range(self.grid.dim)])

    def run_to_steady(self, max_steps: int = 500, rel_tol: float = 1e-7) -> SimState:
        """Step until the mean pore velocity stops changing."""
        prev = None
        for _ in range(max_steps):
            self.step()
            q = self.mean_pore_velocity()
            if prev is not None:
                if np.linalg.norm(q - prev) <= rel_tol * max(np.linalg.norm(q), 1e-300):
                    return self.state
            prev = q
        return self.state


# -- functional wrappers (spec surface; MicroSolver is the efficient path) --

def apply_operator(v_trial: VectorField, state: SimState, mask: PhaseMask,
                   params: MaterialParams, tau: float | None = None) -> VectorField:
    ms = MicroSolver(mask, replace(params, tau=tau or params.tau), advance_transport=False)
    ms.state = state.copy()
    ms._rebuild_viscous()
    return ms.apply_operator(v_trial)


def assemble_rhs(state: SimState, mask: PhaseMask, params: MaterialParams,
                 tau: float | None = None) -> VectorField:
    ms = MicroSolver(mask, replace(params, tau=tau or params.tau), advance_transport=False)
    ms.state = state.copy()
    return ms.assemble_rhs()


def step(state: SimState, mask: PhaseMask, params: MaterialParams) -> SimState:
    ms = MicroSolver(mask, params)
    ms.state = state.copy()
    return ms.step()


def energy_report(state: SimState, mask: PhaseMask, params: MaterialParams,
                  dissipated: float = 0.0, work: float = 0.0) -> EnergyBreakdown:
    """Instantaneous stored energies of a state (ledger terms optional)."""
    ms = MicroSolver(mask, params, advance_transport=False)
    w_flat = state.w.values.reshape(-1)
    e_el, e_cp = ms._compressive_energy_split(w_flat)
    scale = max(e_el + e_cp, dissipated, work, 1e-300)
    resid = abs(e_el + e_cp + dissipated - work) / scale if work else 0.0
    return EnergyBreakdown(e_el, e_cp, dissipated, work, resid)
