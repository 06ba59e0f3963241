"""Unit-cell problems, effective tensors and the micro/macro comparison.

The paper-level program ends in a Biot-type macroscopic model whose explicit
equations are not reproduced here; this module implements the canonical
two-scale cell problems as the engineering stand-in:

  * permeability: penalized (slightly compressible) Stokes flow on the
    periodic cell, unit body force per axis, no-slip on the solid inclusion;
    K_ik = cell average of velocity component i for force e_k.
  * effective elasticity: periodic correctors for unit macroscopic strains
    on the skeleton (P = lam * D law), pores treated as traction-free voids;
    C_eff assembled from the energy form so both symmetries are structural.
  * a Darcy solver on the unit cube driven by an S1/S2 pressure drop, and a
    convergence harness comparing microscopic steady flux against it as the
    cell size shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .geometry import PhaseMask, UnitCellPattern, build_phase_mask, check_pore_connectivity, porosity
from .grid import Grid, ScalarField, sym_component_pairs
from .microsim import MaterialParams, MicroSolver
from .operators import (
    assemble_scalar_stiffness,
    assemble_vector_form,
    cell_average,
    cell_counts,
    cell_volume,
    center_gradient_ops,
    gradient_ops,
    lumped_weights,
    restrict,
)
from .solvers import cg_solve

__all__ = [
    "EffectiveTensors",
    "periodic_cell_grid",
    "permeability_cell_problem",
    "permeability_from_mask",
    "elasticity_cell_problem",
    "elasticity_from_mask",
    "darcy_macro_solve",
    "compare_micro_macro",
]


@dataclass
class EffectiveTensors:
    K: np.ndarray
    C_eff: np.ndarray
    porosity: float
    K_asymmetry: float = 0.0


def periodic_cell_grid(dim: int, n: int) -> Grid:
    return Grid(dim=dim, n_per_axis=n, periodic=(True,) * dim)


def _require_periodic(grid: Grid):
    if not all(grid.periodic):
        raise ValueError("cell problems require a fully periodic grid")


def permeability_from_mask(mask: PhaseMask, mu: float, penalty_ratio: float = 100.0,
                           cg_tol: float = 1e-10, cg_max_iter: int = 50000) -> tuple:
    """Permeability tensor of one periodicity cell; returns (K, asymmetry).

    K already carries the 1/mu dependence: the Darcy flux is q = -K grad p.
    """
    grid = mask.grid
    _require_periodic(grid)
    if not mask.fluid.any():
        return np.zeros((grid.dim, grid.dim)), 0.0
    if not check_pore_connectivity(mask):
        return np.zeros((grid.dim, grid.dim)), 0.0
    if not mask.solid.any():
        raise ValueError("permeability is unbounded without a solid obstacle")
    n = grid.n_nodes
    coef = np.full(np.prod(cell_counts(grid)), mu)
    A = assemble_vector_form(grid, coef, penalty_ratio * coef, reduced_div=True)
    active = np.tile(mask.fluid.ravel(), grid.dim)
    A_red = restrict(A, active)
    diag = np.maximum(A_red.diagonal(), 1e-300)
    wq = lumped_weights(grid)
    vol = float(np.sum(wq))
    K = np.zeros((grid.dim, grid.dim))
    for k in range(grid.dim):
        rhs = np.zeros(grid.dim * n)
        rhs[k * n:(k + 1) * n] = wq
        res = cg_solve(A_red, rhs[active], tol=cg_tol, max_iter=cg_max_iter,
                       precond_diag=diag)
        if not res.converged:
            raise RuntimeError(f"cell-problem CG failed for axis {k}: residual {res.residual:.2e}")
        u = np.zeros(grid.dim * n)
        u[active] = res.x
        for i in range(grid.dim):
            K[i, k] = float(np.sum(wq * u[i * n:(i + 1) * n])) / vol
    asym = float(np.abs(K - K.T).max())
    K = 0.5 * (K + K.T)
    return K, asym


def permeability_cell_problem(pattern: UnitCellPattern, grid: Grid, mu: float,
                              **kw) -> np.ndarray:
    mask = build_phase_mask(pattern, 1.0, grid)
    K, _ = permeability_from_mask(mask, mu, **kw)
    return K


def _unit_strains(dim: int):
    """Voigt-ordered unit macroscopic strain tensors in symmetric storage."""
    pairs = sym_component_pairs(dim)
    out = []
    for i, j in pairs:
        e = np.zeros(len(pairs))
        e[pairs.index((i, j))] = 1.0 if i == j else 0.5
        out.append(e)
    return out


def elasticity_from_mask(mask: PhaseMask, lam: float, cg_tol: float = 1e-10,
                         cg_max_iter: int = 50000) -> np.ndarray:
    """Effective stiffness (Voigt energy form) of the porous skeleton."""
    grid = mask.grid
    _require_periodic(grid)
    dim, n = grid.dim, grid.n_nodes
    pairs = sym_component_pairs(dim)
    coef = lam * cell_average(grid, 1.0 - mask.chi_eps)
    vol_cell = cell_volume(grid)
    A = assemble_vector_form(grid, coef, None)
    diag = A.diagonal()
    precond = np.where(diag > 1e-12 * diag.max(), diag, diag.max())

    ops = gradient_ops(grid)

    def strain_at_gauss(u_flat):
        """Per-Gauss-point symmetric storage strains, list over gauss points."""
        out = []
        for w, mats in ops:
            comps = []
            for i, j in pairs:
                if i == j:
                    comps.append(mats[i] @ u_flat[i * n:(i + 1) * n])
                else:
                    comps.append(0.5 * (mats[j] @ u_flat[i * n:(i + 1) * n]
                                        + mats[i] @ u_flat[j * n:(j + 1) * n]))
            out.append((w, comps))
        return out

    def rhs_for(e_macro):
        f = np.zeros(dim * n)
        for w, mats in ops:
            for c, (i, j) in enumerate(pairs):
                mult = 1.0 if i == j else 2.0
                src = w * mult * vol_cell * coef * e_macro[c]
                if i == j:
                    f[i * n:(i + 1) * n] -= mats[i].T @ src
                else:
                    f[i * n:(i + 1) * n] -= mats[j].T @ (0.5 * src)
                    f[j * n:(j + 1) * n] -= mats[i].T @ (0.5 * src)
        return f

    strains = _unit_strains(dim)
    total = []
    vol = float(np.sum(lumped_weights(grid)))
    # A homogeneous cell gives a roundoff-level rhs and a zero corrector;
    # the absolute floor keeps CG from chasing an unreachable relative target.
    floor = cg_tol * float(np.abs(diag).max()) * np.sqrt(dim * n)
    for e_macro in strains:
        res = cg_solve(A, rhs_for(e_macro), tol=cg_tol, max_iter=cg_max_iter,
                       precond_diag=precond, atol=floor)
        if not res.converged:
            raise RuntimeError(
                f"degenerate corrector for strain mode {e_macro}: residual {res.residual:.2e}")
        gp = strain_at_gauss(res.x)
        total.append([(w, [e_macro[c] + comps[c] for c in range(len(pairs))])
                      for w, comps in gp])
    nv = len(pairs)
    C = np.zeros((nv, nv))
    for a in range(nv):
        for b in range(a, nv):
            acc = 0.0
            for (wa, ca), (wb, cb) in zip(total[a], total[b]):
                for c, (i, j) in enumerate(pairs):
                    mult = 1.0 if i == j else 2.0
                    acc += wa * mult * vol_cell * float(np.sum(coef * ca[c] * cb[c]))
            C[a, b] = C[b, a] = acc / vol
    return C


def elasticity_cell_problem(pattern: UnitCellPattern, grid: Grid, lam: float, **kw) -> np.ndarray:
    mask = build_phase_mask(pattern, 1.0, grid)
    return elasticity_from_mask(mask, lam, **kw)


def darcy_macro_solve(K: np.ndarray, mu_effective: float, bc: tuple,
                      grid: Grid | None = None):
    """Solve -div((K/mu) grad p) = 0 on the unit cube with p fixed on S1/S2
    and no-flux elsewhere.  bc = (p_S1, p_S2).  Returns (pressure, flux)."""
    K = np.asarray(K, dtype=float)
    dim = K.shape[0]
    if np.linalg.eigvalsh(0.5 * (K + K.T)).min() <= 0:
        raise ValueError("K must be symmetric positive definite")
    if grid is None:
        grid = Grid(dim=dim, n_per_axis=33)
    p_s1, p_s2 = bc
    n = grid.n_nodes
    vol_cell = cell_volume(grid)
    ncells = int(np.prod(cell_counts(grid)))
    Kmu = K / mu_effective

    A = None
    for w, mats in gradient_ops(grid):
        for a in range(dim):
            for b in range(dim):
                term = (mats[a].T @ (sp.diags(np.full(ncells, Kmu[a, b] * vol_cell)) @ mats[b])) * w
                A = term if A is None else A + term
    A = A.tocsr()

    x1 = grid.coords()[0]
    lift = p_s2 + (x1 + 0.5) * (p_s1 - p_s2)
    fixed = np.zeros(grid.shape, dtype=bool)
    fixed[0, ...] = True
    fixed[-1, ...] = True
    active = ~fixed.ravel()
    rhs = -(A @ lift.ravel())[active]
    A_red = restrict(A, active)
    res = cg_solve(A_red, rhs, tol=1e-12, max_iter=20000,
                   precond_diag=np.maximum(A_red.diagonal(), 1e-300))
    if not res.converged:
        raise RuntimeError(f"Darcy solve failed: residual {res.residual:.2e}")
    p = lift.ravel()
    p[active] += res.x
    pressure = ScalarField(grid, p.reshape(grid.shape))

    mats = center_gradient_ops(grid)
    grad_mean = np.array([float(np.mean(mats[a] @ p)) for a in range(dim)])
    flux = -Kmu @ grad_mean
    return pressure, flux


def compare_micro_macro(pattern: UnitCellPattern, params: MaterialParams, eps_list,
                        nodes_per_cell: int = 16, cell_grid_n: int | None = None,
                        max_steps: int = 400, steady_tol: float = 1e-7):
    """Steady microscopic pore flux vs the Darcy prediction for shrinking eps.

    Single-fluid configurations only (mu1 == mu2); returns a list of rows
    {eps, micro_flux, darcy_flux, rel_error, observed_order}.
    """
    if params.mu1 != params.mu2:
        raise ValueError("micro/macro comparison requires a single fluid (mu1 == mu2)")
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")

    dim = len(params.p_drive_grad)
    cell_n = cell_grid_n or nodes_per_cell
    cell = periodic_cell_grid(dim, cell_n)
    cell_mask = build_phase_mask(pattern, 1.0, cell)
    K, _ = permeability_from_mask(cell_mask, params.mu1)
    g = np.asarray(params.p_drive_grad, dtype=float)
    _, q_darcy_vec = darcy_macro_solve(K, 1.0, (0.5 * g[0], -0.5 * g[0]))
    q_darcy = float(q_darcy_vec[0])

    rows = []
    prev_err = None
    for eps in eps_list:
        m = round(1.0 / eps)
        grid = Grid(dim=dim, n_per_axis=m * nodes_per_cell + 1)
        mask = build_phase_mask(pattern, eps, grid)
        p_eps = replace(params, epsilon=eps)
        ms = MicroSolver(mask, p_eps, advance_transport=False, solver="direct",
                         pin_solid=True)
        ms.run_to_steady(max_steps=max_steps, rel_tol=steady_tol)
        q_micro = float(ms.mean_pore_velocity()[0])
        rel = abs(q_micro - q_darcy) / max(abs(q_darcy), 1e-300)
        order = float("nan")
        if prev_err is not None and rel > 0 and prev_err > 0:
            order = float(np.log(prev_err / rel) / np.log(2.0))
        rows.append({"eps": eps, "micro_flux": q_micro, "darcy_flux": q_darcy,
                     "rel_error": rel, "observed_order": order})
        prev_err = rel
    return rows
