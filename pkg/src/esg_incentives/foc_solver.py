"""Unique maximiser of ``f`` computed three independent ways.

* :func:`solve_direct` factors the full symmetric first-order system.
* :func:`solve_closed_form` reduces it to an ``n x n`` diagonal-plus-rank-one
  system for the asset tilts and inverts that by Sherman-Morrison.
* :func:`brute_force_maximize` only ever evaluates ``f`` (batched),
  building gradient and Hessian by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .objective import Sensitivities, eval_f_batch, hessian_blocks
from .params import ModelParams

__all__ = [
    "SolverError",
    "ClosedFormIntermediates",
    "compute_intermediates",
    "solve_direct",
    "solve_closed_form",
    "brute_force_maximize",
    "solve",
]


class SolverError(RuntimeError):
    """A linear system that should be nonsingular could not be solved."""


@dataclass(frozen=True)
class ClosedFormIntermediates:
    A: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray
    d: np.ndarray
    m: np.ndarray
    muDiag: np.ndarray
    ell: np.ndarray
    lambda_n: float
    s_vec: np.ndarray
    y_n: float

    def K(self, zS) -> np.ndarray:
        """Column residuals as the affine map ``d - m * zS``."""
        return self.d - self.m * np.asarray(zS)


def compute_intermediates(params: ModelParams) -> ClosedFormIntermediates:
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    A = gam + 1 / (c * nu**2)
    one_minus = 1 - gam / A
    lam = gP * sig**2 / n**3 * (1 - rho**2).sum()
    alpha = gP / (n * gam)
    kappa = 1 + gP / n * ((1 / gam).sum() - one_minus / gam)
    d = (nu - 1 / (c * nu * A)) / kappa
    m = sig / (np.sqrt(n) * kappa) * rho * one_minus
    mu = (
        gam * sig**2 / n * (1 - (rho**2).sum() / n + one_minus * rho**2 / n)
        + gP * sig**2 * rho**2 / (kappa * n**3) * one_minus**2
    )
    ell = gP * sig * rho / n**2.5 * one_minus * d - gam * sig / n**1.5 * rho / (A * c * nu)
    s_vec = 1 / mu
    y_n = lam / (1 + lam * s_vec.sum())
    return ClosedFormIntermediates(
        A=A, alpha=alpha, kappa=kappa, d=d, m=m, muDiag=mu, ell=ell,
        lambda_n=float(lam), s_vec=s_vec, y_n=float(y_n),
    )


def solve_direct(params: ModelParams) -> Sensitivities:
    """Solve ``H x = -b`` with a dense symmetric-indefinite (LDL^T) factorization."""
    sys_ = hessian_blocks(params)
    H, b = sys_.H, sys_.b
    try:
        x = scipy.linalg.solve(H, -b, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverError(f"first-order system is singular: {exc}") from exc
    resid = np.max(np.abs(H @ x + b))
    if not np.isfinite(resid) or resid > 1e-10 * (1 + np.max(np.abs(b))) * max(1.0, np.linalg.norm(H, np.inf)):
        raise SolverError(
            f"residual {resid:.3e} too large (condition ~ {np.linalg.cond(H):.3e})"
        )
    return Sensitivities.from_vector(x, params.n)


def solve_closed_form(params: ModelParams) -> Sensitivities:
    """Maximiser from the explicit tilt formula and the row-wise ``q`` formulas."""
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    ci = compute_intermediates(params)
    s = ci.s_vec
    # (D + lam 11^T)^{-1} = S - y s s^T
    zS = s * ci.ell - ci.y_n * s * (s @ ci.ell)
    K = ci.K(zS)
    q = ci.alpha[:, None] * K[None, :] - sig / np.sqrt(n) * np.outer(zS, rho)
    q[np.diag_indices(n)] = (gP / n * K - gam * sig / np.sqrt(n) * rho * zS + 1 / (c * nu)) / ci.A
    return Sensitivities(q / nu[None, :], zS)


def _fd_gradient(fun, x, h):
    """Central differences; ``fun`` maps a stack of points to values."""
    E = h * np.eye(x.size)
    return (fun(x + E) - fun(x - E)) / (2 * h)


def _fd_hessian(fun, x, h):
    """Second-order central differences over all pairs, diagonal included.

    ``f(x + h e_i + h e_j) - f(x + h e_i - h e_j) - f(x - h e_i + h e_j)
    + f(x - h e_i - h e_j)`` over ``4 h^2``; for ``i == j`` this is the
    ``2h`` second difference.
    """
    m = x.size
    E = h * np.eye(m)
    out = np.zeros((m, m))
    for si, sj, w in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
        P = x + si * E[:, None, :] + sj * E[None, :, :]
        out += w * fun(P.reshape(m * m, m)).reshape(m, m)
    return out / (4 * h**2)


def brute_force_maximize(
    params: ModelParams,
    tol: float = 1e-9,
    x0: Sensitivities | None = None,
    step: float = 1.0,
    max_iter: int = 20,
) -> Sensitivities:
    """Maximise ``f`` using nothing but evaluations of ``f``.

    The Hessian is estimated once by second-order central differences and
    used for Newton steps; each step re-estimates the gradient by central
    differences.  ``f`` is quadratic, so central differences carry no
    truncation error whatever ``step`` is; round-off in a difference of
    values of size ``|f|`` shrinks like ``eps |f| / step``, which is why the
    default step is large.

    ``tol`` bounds the sup-norm of the finite-difference gradient, measured
    relative to ``1 + max|Hessian entry|``.

    Raises
    ------
    SolverError
        If the gradient does not fall below ``tol`` within ``max_iter`` steps.
    """
    n = params.n
    fun = lambda X: eval_f_batch(params, X)  # noqa: E731
    x = np.zeros(n * n + n) if x0 is None else x0.to_vector()
    H = _fd_hessian(fun, x, step)
    H = (H + H.T) / 2
    scale = 1 + np.max(np.abs(H))
    lu = scipy.linalg.lu_factor(H)
    gnorm = np.inf
    for _ in range(max_iter):
        g = _fd_gradient(fun, x, step)
        gnorm = np.max(np.abs(g))
        if gnorm <= tol * scale:
            return Sensitivities.from_vector(x, n)
        x = x - scipy.linalg.lu_solve(lu, g)
    raise SolverError(
        f"finite-difference Newton did not converge: |grad| = {gnorm:.3e}, "
        f"condition estimate {np.linalg.cond(H):.3e}"
    )


def solve(params: ModelParams) -> Sensitivities:
    """Maximiser of ``f``; ``gamma_P == 0`` uses the exact row-decoupled formulas."""
    if params.gamma_P == 0:
        from .row_decoupled import gp0_heterogeneous

        return gp0_heterogeneous(params).sensitivities()
    return solve_direct(params)
