"""Conjugate gradients and the inverse power iteration built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CGResult", "cg_solve", "inverse_power_iteration"]


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cg_solve(apply_A, rhs: np.ndarray, tol: float = 1e-10, max_iter: int = 5000,
             x0: np.ndarray | None = None, precond_diag: np.ndarray | None = None,
             atol: float = 0.0) -> CGResult:
    """Preconditioned conjugate gradients for an SPD operator.

    `apply_A` is a callable (matrix-vector product) or a matrix with `@`.
    Stops when ||rhs - A x|| <= max(tol * ||rhs||, atol); on stagnation past
    max_iter the best iterate is returned with converged=False.  An absolute
    floor matters for consistent singular systems whose rhs is roundoff-small:
    a purely relative target is then unreachable.
    """
    op = apply_A if callable(apply_A) else (lambda v: apply_A @ v)
    b_norm = float(np.linalg.norm(rhs))
    if b_norm <= atol:
        return CGResult(np.zeros_like(rhs), 0, 0.0, True)
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - op(x)
    if precond_diag is not None:
        inv_d = 1.0 / precond_diag
        z = inv_d * r
    else:
        inv_d = None
        z = r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    res = float(np.linalg.norm(r))
    target = max(tol * b_norm, atol)
    while res > target and it < max_iter:
        Ap = op(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break  # loss of positivity, bail with current iterate
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r if inv_d is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        res = float(np.linalg.norm(r))
        it += 1
    return CGResult(x, it, res / b_norm, res <= target)


def inverse_power_iteration(apply_A, mass_diag: np.ndarray, seed: int = 0,
                            tol: float = 1e-8, max_outer: int = 500,
                            cg_tol: float = 1e-10, precond_diag: np.ndarray | None = None):
    """Smallest eigenvalue of A x = lambda M x with diagonal mass M.

    Returns (lam, x, outer_iterations, rayleigh_residual).  Each outer step
    solves A y = M x by CG and normalizes in the M-inner product; converged
    when the relative Rayleigh-quotient residual drops below tol.
    """
    op = apply_A if callable(apply_A) else (lambda v: apply_A @ v)
    n = mass_diag.size
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.sqrt(x @ (mass_diag * x))
    lam = float(x @ op(x))
    y = None
    for outer in range(1, max_outer + 1):
        sol = cg_solve(op, mass_diag * x, tol=cg_tol, x0=y, precond_diag=precond_diag)
        y = sol.x
        nrm = np.sqrt(y @ (mass_diag * y))
        if nrm == 0.0:
            raise RuntimeError("inverse power iteration collapsed to the zero vector")
        x = y / nrm
        Ax = op(x)
        lam = float(x @ Ax)
        resid = float(np.linalg.norm(Ax - lam * mass_diag * x)) / max(abs(lam), 1e-300)
        if resid < tol:
            return lam, x, outer, resid
    return lam, x, max_outer, resid
