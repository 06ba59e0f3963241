"""Sparse assembly of the discrete quadratic forms behind every solve.

The weak forms (viscous/elastic D:D terms and the compressibility div*div
penalty) are assembled from trilinear/bilinear elements on the grid cells
with tensor-product Gauss quadrature; the div*div term uses single-point
(reduced) quadrature to avoid volumetric locking at large compressibility
moduli.  Coefficients are piecewise constant per cell (corner averages).
This yields symmetric positive semi-definite compact-stencil matrices whose
1D reductions are the classical tridiagonal forms.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid, sym_component_pairs

__all__ = [
    "cell_counts",
    "cell_corner_indices",
    "cell_average",
    "gauss_points",
    "gradient_ops",
    "center_gradient_ops",
    "assemble_scalar_stiffness",
    "assemble_vector_form",
    "lumped_weights",
    "restrict",
    "expand",
]


def cell_counts(grid: Grid):
    n = grid.n_per_axis
    return tuple(n if grid.periodic[k] else n - 1 for k in range(grid.dim))


def cell_volume(grid: Grid) -> float:
    return float(np.prod([grid.spacing(k) for k in range(grid.dim)]))


@lru_cache(maxsize=32)
def cell_corner_indices(grid: Grid) -> np.ndarray:
    """Flat node index of each cell corner, shape (ncells, 2^dim)."""
    mc = cell_counts(grid)
    cells = np.indices(mc).reshape(grid.dim, -1)
    cols = []
    for off in itertools.product((0, 1), repeat=grid.dim):
        axes = []
        for k in range(grid.dim):
            ix = cells[k] + off[k]
            if grid.periodic[k]:
                ix = ix % grid.n_per_axis
            axes.append(ix)
        cols.append(np.ravel_multi_index(tuple(axes), grid.shape))
    return np.stack(cols, axis=1)


def cell_average(grid: Grid, nodal: np.ndarray) -> np.ndarray:
    """Per-cell mean of the corner node values (flat, length ncells)."""
    corners = cell_corner_indices(grid)
    return nodal.ravel()[corners].mean(axis=1)


def gauss_points(dim: int):
    """Tensor-product 2-point Gauss rule on the reference cell [0,1]^dim."""
    g = 0.5 / np.sqrt(3.0)
    pts1 = (0.5 - g, 0.5 + g)
    out = []
    for xi in itertools.product(pts1, repeat=dim):
        out.append((0.5**dim, xi))
    return out


def _shape_grad_matrices(grid: Grid, xi) -> list:
    """Sparse (ncells, n_nodes) maps from nodal values to d/dx_a at local xi."""
    dim = grid.dim
    corners = cell_corner_indices(grid)
    ncells = corners.shape[0]
    rows = np.repeat(np.arange(ncells), 2**dim)
    mats = []
    offsets = list(itertools.product((0, 1), repeat=dim))
    for a in range(dim):
        vals = np.empty((ncells, 2**dim))
        for c, off in enumerate(offsets):
            v = 1.0
            for k in range(dim):
                phi = xi[k] if off[k] else 1.0 - xi[k]
                if k == a:
                    v *= (1.0 if off[k] else -1.0) / grid.spacing(k)
                else:
                    v *= phi
            vals[:, c] = v
        m = sp.csr_matrix(
            (vals.ravel(), (rows, corners.ravel())), shape=(ncells, grid.n_nodes)
        )
        mats.append(m)
    return mats


@lru_cache(maxsize=32)
def gradient_ops(grid: Grid):
    """[(weight, [G_axis sparse]), ...] over the full Gauss rule."""
    return tuple(
        (w, tuple(_shape_grad_matrices(grid, xi))) for w, xi in gauss_points(grid.dim)
    )


@lru_cache(maxsize=32)
def center_gradient_ops(grid: Grid):
    """Single-point (cell-center) gradient operators, for reduced terms."""
    return tuple(_shape_grad_matrices(grid, (0.5,) * grid.dim))


def assemble_scalar_stiffness(grid: Grid, coef_cells: np.ndarray) -> sp.csr_matrix:
    """Stiffness of the form  sum_cells coef * |grad u|^2."""
    vol = cell_volume(grid)
    d = sp.diags(np.asarray(coef_cells, dtype=float) * vol)
    A = None
    for w, mats in gradient_ops(grid):
        for G in mats:
            term = (G.T @ (d @ G)) * w
            A = term if A is None else A + term
    return A.tocsr()


def _place(G: sp.spmatrix, comp: int, dim: int, n: int) -> sp.spmatrix:
    blocks = [None] * dim
    blocks[comp] = G
    empties = sp.csr_matrix((G.shape[0], n))
    return sp.hstack([b if b is not None else empties for b in blocks], format="csr")


def assemble_vector_form(
    grid: Grid,
    coef_sym_cells: np.ndarray,
    coef_div_cells: np.ndarray | None = None,
    reduced_div: bool = True,
) -> sp.csr_matrix:
    """Matrix of  sum coef_sym*D(u):D(v) + coef_div*(div u)(div v).

    Acts on component-major stacked vectors [u_0.ravel(), u_1.ravel(), ...].
    Off-diagonal strain components carry multiplicity two, so u^T A u equals
    the quadrature of coef_sym |D(u)|^2 + coef_div (div u)^2 exactly.
    """
    dim, n = grid.dim, grid.n_nodes
    vol = cell_volume(grid)
    d_sym = sp.diags(np.asarray(coef_sym_cells, dtype=float) * vol)
    A = None

    def add(term):
        nonlocal A
        A = term if A is None else A + term

    for w, mats in gradient_ops(grid):
        for i, j in sym_component_pairs(dim):
            mult = 1.0 if i == j else 2.0
            if i == j:
                S = _place(mats[i], i, dim, n)
            else:
                S = 0.5 * (_place(mats[j], i, dim, n) + _place(mats[i], j, dim, n))
            add((S.T @ (d_sym @ S)) * (w * mult))

    if coef_div_cells is not None:
        d_div = sp.diags(np.asarray(coef_div_cells, dtype=float) * vol)
        if reduced_div:
            mats = center_gradient_ops(grid)
            Div = sum(_place(mats[a], a, dim, n) for a in range(dim))
            add(Div.T @ (d_div @ Div))
        else:
            for w, mats in gradient_ops(grid):
                Div = sum(_place(mats[a], a, dim, n) for a in range(dim))
                add((Div.T @ (d_div @ Div)) * w)
    return A.tocsr()


def lumped_weights(grid: Grid, ncomp: int = 1) -> np.ndarray:
    """Diagonal (lumped) quadrature mass, tiled over components."""
    w = grid.node_weights().ravel()
    return np.tile(w, ncomp)


def restrict(A: sp.spmatrix, active: np.ndarray) -> sp.csr_matrix:
    return A.tocsr()[active][:, active]


def expand(x_red: np.ndarray, active: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[active] = x_red
    return out
