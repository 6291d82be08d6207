"""Heterogeneous risk-neutral limit (``gamma_P -> 0``) and sign persistence.

With ``gamma_P = 0`` the principal's penalty vanishes and the objective
separates across contracts, so every row has an explicit solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import Sensitivities
from .params import ModelParams

__all__ = [
    "Gp0Solution",
    "SignReport",
    "PersistenceResult",
    "gp0_heterogeneous",
    "sign_pattern",
    "persistence_scan",
    "SIGN_TOL",
]

SIGN_TOL = 1e-12


@dataclass(frozen=True)
class Gp0Solution:
    """Row-decoupled maximiser at ``gamma_P = 0``.

    ``q0_matrix[i, j] = nu[j] * zQ[i, j]``; ``s0`` is the vector of tilts.
    """

    s0: np.ndarray
    q0_matrix: np.ndarray
    pi: np.ndarray
    nu_dagger: np.ndarray
    nu: np.ndarray

    def sensitivities(self) -> Sensitivities:
        return Sensitivities(self.q0_matrix / self.nu[None, :], self.s0)


def gp0_heterogeneous(params: ModelParams) -> Gp0Solution:
    """Closed-form ``gamma_P = 0`` maximiser; ``params.gamma_P`` is ignored."""
    n, c, gam, nu, rho, sig = params.n, params.c, params.gamma, params.nu, params.rho, params.sigma
    A = gam + 1 / (c * nu**2)
    rho2 = (rho**2).sum()
    pi = rho2 - rho**2 + gam / A * rho**2
    s0 = -np.sqrt(n) / sig * rho / (A * c * nu * (n - pi))
    q = -sig / np.sqrt(n) * np.outer(s0, rho)
    q[np.diag_indices(n)] = (1 / (c * nu) - gam * sig / np.sqrt(n) * rho * s0) / A
    nu_dagger = np.sqrt((n - rho2 + rho**2) / (gam * c * (n - rho2)))
    return Gp0Solution(s0=s0, q0_matrix=q, pi=pi, nu_dagger=nu_dagger, nu=params.nu.copy())


def _classify(v, tol=SIGN_TOL):
    return np.where(v > tol, 1, np.where(v < -tol, -1, 0))


@dataclass(frozen=True)
class SignReport:
    """Sign classification of a maximiser against the risk-neutral pattern.

    ``zQ_signs`` and ``zS_signs`` hold +1 / -1 / 0 (zero within tolerance).
    ``offdiag_constrained[i, j]`` is False where ``rho_i * rho_j == 0`` and
    on the diagonal; ``s_tilt_constrained[i]`` is False where ``rho_i == 0``.
    Those entries carry no sign prediction and are skipped by the checks.
    """

    zQ_signs: np.ndarray
    zS_signs: np.ndarray
    s_tilt_constrained: np.ndarray
    offdiag_constrained: np.ndarray
    diagonal_all_positive: bool
    s_tilt_anti_rho: bool
    offdiag_matches_rhorho: bool

    @property
    def all_hold(self) -> bool:
        return self.diagonal_all_positive and self.s_tilt_anti_rho and self.offdiag_matches_rhorho


def sign_pattern(s: Sensitivities, rho, tol: float = SIGN_TOL) -> SignReport:
    rho = np.asarray(rho, dtype=float)
    n = s.n
    zq = _classify(s.zQ, tol)
    zs = _classify(s.zS, tol)
    rs = _classify(rho, tol)
    s_con = rs != 0
    rr = np.outer(rs, rs)
    off_con = (rr != 0) & ~np.eye(n, dtype=bool)
    return SignReport(
        zQ_signs=zq,
        zS_signs=zs,
        s_tilt_constrained=s_con,
        offdiag_constrained=off_con,
        diagonal_all_positive=bool(np.all(np.diag(zq) == 1)),
        s_tilt_anti_rho=bool(np.all(zs[s_con] == -rs[s_con])),
        offdiag_matches_rhorho=bool(np.all(zq[off_con] == rr[off_con])),
    )


@dataclass(frozen=True)
class PersistenceResult:
    """Outcome of a sign-persistence scan.

    ``bound`` is the largest grid value up to which every tracked strict
    ``gamma_P = 0`` sign held (0.0 if the first grid point already flips);
    ``first_flip`` is the first grid value with a flip, ``None`` if none.
    """

    bound: float
    first_flip: float | None
    flipped: tuple

    def __float__(self):
        return self.bound


_WHICH = ("all", "diagonal", "s_tilt", "offdiag")


def persistence_scan(params: ModelParams, gamma_P_grid, which: str = "all") -> PersistenceResult:
    """Sweep ``gamma_P`` and report where the strict risk-neutral signs first change.

    ``which`` restricts the tracked entries to the diagonal, the asset tilts,
    or the off-diagonal loadings.  Entries that are zero (within
    :data:`SIGN_TOL`) at ``gamma_P = 0`` are never tracked.
    """
    from .foc_solver import solve_direct

    grid = np.asarray(gamma_P_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty gamma_P grid")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("gamma_P grid must be non-negative and strictly increasing")
    if which not in _WHICH:
        raise ValueError(f"which must be one of {_WHICH}")
    n = params.n
    ref = gp0_heterogeneous(params).sensitivities()
    ref_q, ref_s = _classify(ref.zQ), _classify(ref.zS)
    diag = np.eye(n, dtype=bool)
    track_q = ref_q != 0
    track_s = ref_s != 0
    if which == "diagonal":
        track_q &= diag
        track_s[:] = False
    elif which == "s_tilt":
        track_q[:] = False
    elif which == "offdiag":
        track_q &= ~diag
        track_s[:] = False
    bound = 0.0
    for g in grid:
        sol = ref if g == 0 else solve_direct(params.with_gamma_P(float(g)))
        bad_q = track_q & (_classify(sol.zQ) != ref_q)
        bad_s = track_s & (_classify(sol.zS) != ref_s)
        if bad_q.any() or bad_s.any():
            flipped = tuple(f"zQ[{i + 1},{j + 1}]" for i, j in zip(*np.nonzero(bad_q))) + tuple(
                f"zS[{i + 1}]" for i in np.flatnonzero(bad_s)
            )
            return PersistenceResult(bound=bound, first_flip=float(g), flipped=flipped)
        bound = float(g)
    return PersistenceResult(bound=bound, first_flip=None, flipped=())
