"""The principal's reduced objective and its quadratic structure.

Decision variables are a pair ``(zQ, zS)``: ``zQ[i, j]`` is contract ``i``'s
loading on signal ``j`` and ``zS[i]`` is contract ``i``'s tilt on the traded
asset.  Flattened vectors always stack the columns of ``zQ`` first (Fortran
order), followed by ``zS``, so that ``x[j * n + i] == zQ[i, j]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams

__all__ = [
    "Sensitivities",
    "FocSystem",
    "eval_f",
    "eval_f_decomposed",
    "eval_f_batch",
    "eval_g_phi",
    "gradient",
    "hessian_blocks",
]


@dataclass(frozen=True, eq=False)
class Sensitivities:
    """A candidate contract loading pair."""

    zQ: np.ndarray
    zS: np.ndarray

    def __post_init__(self):
        zQ = np.asarray(self.zQ, dtype=float)
        zS = np.asarray(self.zS, dtype=float)
        n = zS.shape[0] if zS.ndim == 1 else -1
        if zQ.shape != (n, n):
            raise ValueError(f"zQ shape {zQ.shape} inconsistent with zS shape {zS.shape}")
        if not (np.all(np.isfinite(zQ)) and np.all(np.isfinite(zS))):
            raise ValueError("sensitivities must be finite")
        object.__setattr__(self, "zQ", zQ)
        object.__setattr__(self, "zS", zS)

    @property
    def n(self) -> int:
        return self.zS.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.zQ.ravel(order="F"), self.zS])

    @classmethod
    def from_vector(cls, x, n: int) -> "Sensitivities":
        x = np.asarray(x, dtype=float)
        if x.shape != (n * n + n,):
            raise ValueError(f"vector of length {x.shape} does not match n={n}")
        return cls(x[: n * n].reshape((n, n), order="F"), x[n * n:])

    @classmethod
    def zeros(cls, n: int) -> "Sensitivities":
        return cls(np.zeros((n, n)), np.zeros(n))

    def __eq__(self, other):
        if not isinstance(other, Sensitivities):
            return NotImplemented
        return np.array_equal(self.zQ, other.zQ) and np.array_equal(self.zS, other.zS)

    __hash__ = None


@dataclass(frozen=True)
class FocSystem:
    """Constant Hessian blocks and linear term of ``f``.

    ``f(x) = f(0) + b.x + x.H.x / 2`` with ``H = [[H_QQ, H_QS], [H_QS.T, H_SS]]``
    and ``b = [vec(b_Q), b_S]``.
    """

    H_QQ: np.ndarray
    H_QS: np.ndarray
    H_SS: np.ndarray
    b_Q: np.ndarray
    b_S: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return np.block([[self.H_QQ, self.H_QS], [self.H_QS.T, self.H_SS]])

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([self.b_Q.ravel(order="F"), self.b_S])


def _check(params: ModelParams, s: Sensitivities):
    if s.n != params.n:
        raise ValueError(f"sensitivities have n={s.n}, economy has n={params.n}")


def _column_residuals(params, zQ, zS):
    # nu_i - nu_i * sum_j zQ[j, i] - rho_i * sigma / sqrt(n) * sum_k zS[k]
    n = params.n
    return params.nu - params.nu * zQ.sum(axis=0) - params.rho * params.sigma / np.sqrt(n) * zS.sum()


def _g(params, zQ, zS):
    n, c, gam, nu, rho, sig = params.n, params.c, params.gamma, params.nu, params.rho, params.sigma
    d = np.diag(zQ)
    rows = (
        d**2 / (2 * c)
        + gam / 2 * (zQ**2 @ nu**2)
        + gam * sig**2 / 2 * zS**2
        + gam * sig / np.sqrt(n) * zS * (zQ @ (rho * nu))
    )
    return -rows.sum() / n + (d / c).sum() / n


def _phi(params, zQ, zS):
    n = params.n
    K = _column_residuals(params, zQ, zS)
    tail = (1 - params.rho**2) * params.sigma**2 / n * zS.sum() ** 2
    return (K**2 + tail).sum() / n**2


def eval_f(params: ModelParams, s: Sensitivities) -> float:
    """Evaluate the principal's certainty-equivalent rate ``f(zQ, zS)``.

    Term-by-term evaluation of the double sum (agents' incentive and risk
    costs, then the principal's aggregate-exposure penalty).
    """
    _check(params, s)
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    zQ, zS = s.zQ, s.zS
    total = 0.0
    for i in range(n):
        inner = zQ[i, i] ** 2 / (2 * c[i])
        inner += gam[i] / 2 * sum(nu[j] ** 2 * zQ[i, j] ** 2 for j in range(n))
        inner += gam[i] * sig**2 / 2 * zS[i] ** 2
        inner += gam[i] * sig / np.sqrt(n) * zS[i] * sum(rho[j] * nu[j] * zQ[i, j] for j in range(n))
        inner -= zQ[i, i] / c[i]
        total -= inner / n
    sum_s = zS.sum()
    pen = 0.0
    for i in range(n):
        col = nu[i] - nu[i] * zQ[:, i].sum() - rho[i] / np.sqrt(n) * sig * sum_s
        pen += col**2 + (1 - rho[i] ** 2) * sig**2 / n * sum_s**2
    return float(total - gP / 2 / n**2 * pen)


def eval_f_batch(params: ModelParams, X) -> np.ndarray:
    """Evaluate ``f`` at many stacked vectors at once.

    ``X`` has shape ``(k, n*n + n)`` in the layout of
    :meth:`Sensitivities.to_vector`; returns shape ``(k,)``.  Same sum as
    :func:`eval_f`, vectorised over points.
    """
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != n * n + n:
        raise ValueError(f"expected vectors of length {n * n + n}, got {X.shape[1]}")
    zQ = X[:, : n * n].reshape(-1, n, n).transpose(0, 2, 1)
    zS = X[:, n * n :]
    d = np.diagonal(zQ, axis1=1, axis2=2)
    rows = (
        d**2 / (2 * c)
        + gam / 2 * (zQ**2 @ nu**2)
        + gam * sig**2 / 2 * zS**2
        + gam * sig / np.sqrt(n) * zS * (zQ @ (rho * nu))
        - d / c
    )
    tot = zS.sum(axis=1)
    col = nu - nu * zQ.sum(axis=1) - np.outer(tot, rho) * sig / np.sqrt(n)
    pen = (col**2).sum(axis=1) + (1 - rho**2).sum() * sig**2 / n * tot**2
    return -rows.sum(axis=1) / n - gP / (2 * n**2) * pen


def eval_f_decomposed(params: ModelParams, s: Sensitivities) -> float:
    """Evaluate ``f`` through its completed-squares representation.

    The first-best constant ``sum(1/c)/2n`` minus the incentive-cost squares
    ``(zQ[i,i] - 1)^2``, the row-wise hedging square, the row-wise quadratic
    form with ``I - rho rho^T / n``, and the principal penalty.
    """
    _check(params, s)
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    zQ, zS = s.zQ, s.zS
    w = zQ * nu  # row i is nu (.) zQ[i, :]
    proj = np.eye(n) - np.outer(rho, rho) / n
    val = (1 / c).sum() / (2 * n)
    val -= ((np.diag(zQ) - 1) ** 2 / c).sum() / (2 * n)
    val -= (gam * (sig * zS + w @ rho / np.sqrt(n)) ** 2).sum() / (2 * n)
    val -= (gam * np.einsum("ij,jk,ik->i", w, proj, w)).sum() / (2 * n)
    return float(val - gP / 2 * _phi(params, zQ, zS))


def eval_g_phi(params: ModelParams, s: Sensitivities) -> tuple[float, float]:
    """Split ``f = g - (gamma_P / 2) * phi``.

    ``g`` collects the agents' terms and does not depend on ``gamma_P``;
    ``phi >= 0`` is the squared weighted distance to the identity-pooling /
    market-neutral constraint set.
    """
    _check(params, s)
    return float(_g(params, s.zQ, s.zS)), float(_phi(params, s.zQ, s.zS))


def gradient(params: ModelParams, s: Sensitivities) -> Sensitivities:
    """Analytic partial derivatives of ``f``, returned in ``Sensitivities`` shape."""
    _check(params, s)
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    zQ, zS = s.zQ, s.zS
    K = _column_residuals(params, zQ, zS)
    dQ = (
        -np.outer(gam, nu**2) * zQ / n
        - gam[:, None] * sig / n**1.5 * np.outer(zS, rho * nu)
        + gP / n**2 * (nu * K)[None, :]
    )
    dQ[np.diag_indices(n)] -= (np.diag(zQ) - 1) / (n * c)
    dS = (
        -gam * sig**2 / n * zS
        - gam * sig / n**1.5 * (zQ @ (rho * nu))
        + gP * sig / n**2.5 * (rho @ K)
        - gP * sig**2 / n**3 * (1 - rho**2).sum() * zS.sum()
    )
    return Sensitivities(dQ, dS)


def hessian_blocks(params: ModelParams) -> FocSystem:
    """Assemble the first-order-condition system ``H x = -b`` via Kronecker forms."""
    n, c, gam, nu, rho, sig, gP = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.gamma_P,
    )
    G = np.diag(gam)
    N2 = np.diag(nu**2)
    J = np.ones((n, n))
    own = np.zeros((n, n))
    # Diag[(1/c_1) E_11, ..., (1/c_n) E_nn]: block i carries 1/c_i at (i, i)
    own_diag = np.zeros(n * n)
    own_diag[np.arange(n) * n + np.arange(n)] = 1 / c
    H_QQ = -np.kron(N2, G) / n - gP / n**2 * np.kron(N2, J) - np.diag(own_diag) / n
    rn = (rho * nu)[:, None]
    H_QS = -sig / n**1.5 * np.kron(rn, G) - gP * sig / n**2.5 * np.kron(rn, J)
    H_SS = -sig**2 / n * G - gP * sig**2 / n**2 * J
    b_Q = own + gP / n**2 * np.broadcast_to(nu**2, (n, n))
    b_Q[np.diag_indices(n)] += 1 / (n * c)
    b_S = np.full(n, gP * sig / n**2.5 * (rho * nu).sum())
    return FocSystem(H_QQ=H_QQ, H_QS=H_QS, H_SS=H_SS, b_Q=b_Q, b_S=b_S)
