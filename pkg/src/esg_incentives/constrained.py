"""The ``gamma_P -> infinity`` regime as an equality-constrained QP.

In this limit the maximiser of ``f`` tends to the maximiser of ``g`` over the
affine set ``{x : O x = o}``: every signal's loadings sum to one across
contracts (identity pooling) and the asset tilts sum to zero (market
neutrality).  Two solvers are provided: a bordered KKT solve and the
explicit column solution through the resolvent of a nonnegative matrix
``L`` with spectral radius below one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .foc_solver import SolverError, solve_direct
from .objective import Sensitivities, eval_g_phi, hessian_blocks
from .params import ModelParams

__all__ = [
    "ConstraintOperator",
    "ColumnSolutionIntermediates",
    "ConstrainedSolution",
    "build_constraint_operator",
    "g_quadratic",
    "project_feasible",
    "solve_kkt",
    "column_intermediates",
    "solve_explicit_column",
    "m_matrix_diagnostics",
    "diag_sign_test",
    "mixed_sign_check",
    "penalty_convergence_study",
    "ConvergenceRow",
]


@dataclass(frozen=True)
class ConstraintOperator:
    O: np.ndarray
    o: np.ndarray
    W: np.ndarray

    def residual(self, x) -> np.ndarray:
        return self.O @ np.asarray(x) - self.o

    def weighted_sq(self, x) -> float:
        r = self.residual(x)
        return float(r @ self.W @ r)


def build_constraint_operator(params: ModelParams) -> ConstraintOperator:
    """Constraint map on column-stacked ``(vec(zQ), zS)``.

    Row ``i < n`` is ``nu_i * sum_j zQ[j, i] + rho_i sigma / sqrt(n) * sum(zS)``;
    the last row is ``sum(zS)``.

    Raises
    ------
    SolverError
        If ``O`` is numerically rank deficient.
    """
    n, nu, rho, sig = params.n, params.nu, params.rho, params.sigma
    O = np.zeros((n + 1, n * n + n))
    for i in range(n):
        O[i, i * n:(i + 1) * n] = nu[i]  # column i of zQ
    O[:n, n * n:] = (rho * sig / np.sqrt(n))[:, None]
    O[n, n * n:] = 1.0
    o = np.append(nu, 0.0)
    W = np.diag(np.append(np.full(n, 1 / n**2), sig**2 / n**3 * (1 - rho**2).sum()))
    sv = np.linalg.svd(O, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise SolverError(f"constraint operator is rank deficient (singular values {sv})")
    return ConstraintOperator(O=O, o=o, W=W)


def g_quadratic(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Hessian ``H_g`` and gradient at zero ``h`` of ``g`` (``f`` with no penalty)."""
    fs = hessian_blocks(params.with_gamma_P(0.0))
    return fs.H, fs.b


def project_feasible(params: ModelParams, x, op: ConstraintOperator | None = None) -> np.ndarray:
    """Minimum-norm correction of ``x`` onto ``{O x = o}``."""
    op = build_constraint_operator(params) if op is None else op
    x = np.asarray(x, dtype=float)
    corr = op.O.T @ np.linalg.solve(op.O @ op.O.T, op.o - op.O @ x)
    return x + corr


@dataclass(frozen=True)
class ConstrainedSolution:
    zQ_bar: np.ndarray
    zS_bar: np.ndarray
    mu_bar: np.ndarray
    theta_star: float
    iota: np.ndarray

    @property
    def sensitivities(self) -> Sensitivities:
        return Sensitivities(self.zQ_bar, self.zS_bar)


def solve_kkt(params: ModelParams) -> ConstrainedSolution:
    """Solve ``[[H_g, O^T], [O, 0]] [x; iota] = [-h; o]`` directly.

    The column multipliers ``mu_bar`` and the tilt multiplier
    ``theta_star`` are recovered from ``iota`` (``mu_j = nu_j iota_j``,
    ``theta = iota_{n+1} + sigma / sqrt(n) * rho . iota[:n]``).
    """
    n = params.n
    H, h = g_quadratic(params)
    op = build_constraint_operator(params)
    m = n * n + n
    K = np.block([[H, op.O.T], [op.O, np.zeros((n + 1, n + 1))]])
    rhs = np.concatenate([-h, op.o])
    try:
        sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SolverError(f"bordered KKT system is singular: {exc}") from exc
    x, iota = sol[:m], sol[m:]
    s = Sensitivities.from_vector(x, n)
    mu_bar = params.nu * iota[:n]
    theta = iota[n] + params.sigma / np.sqrt(n) * (params.rho @ iota[:n])
    return ConstrainedSolution(s.zQ, s.zS, mu_bar, float(theta), iota)


@dataclass(frozen=True)
class ColumnSolutionIntermediates:
    p: np.ndarray
    Theta: np.ndarray
    zeta: np.ndarray
    a: np.ndarray
    M: np.ndarray
    upsilon: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    L: np.ndarray
    U: np.ndarray
    V: np.ndarray
    C: np.ndarray
    r_vec: np.ndarray
    resolvent: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta_star: float


def column_intermediates(params: ModelParams) -> ColumnSolutionIntermediates:
    n, c, gam, nu, rho, sig = params.n, params.c, params.gamma, params.nu, params.rho, params.sigma
    # p[i, j]: diagonal of the inverse row Hessian of contract i
    p = 1 / (gam[:, None] * nu[None, :] ** 2)
    p[np.diag_indices(n)] = 1 / (gam * nu**2 + 1 / c)
    Theta = p.sum(axis=0)
    pdiag = np.diag(p)
    zeta = pdiag / c
    a = rho * zeta / nu
    M = (rho * nu)[None, :] * p
    upsilon = p @ (rho**2 * nu**2)
    phi = 1 - gam / n * upsilon
    w = 1 / (n * Theta)
    L = (w * a)[None, :] * M / phi[:, None]
    V = n / (gam * sig**2 * phi)
    C = (M @ ((1 - zeta) / Theta)) / (sig * np.sqrt(n))
    r_vec = rho * nu / c * pdiag / (sig * np.sqrt(n))
    U = -(C + r_vec) / phi
    I_L = np.eye(n) - L
    try:
        R = np.linalg.inv(I_L)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"I - L is singular: {exc}") from exc
    u = R @ V
    v = R @ U
    theta = -v.sum() / u.sum()
    return ColumnSolutionIntermediates(
        p=p, Theta=Theta, zeta=zeta, a=a, M=M, upsilon=upsilon, phi=phi, w=w, L=L,
        U=U, V=V, C=C, r_vec=r_vec, resolvent=R, u=u, v=v, theta_star=float(theta),
    )


def solve_explicit_column(params: ModelParams) -> ConstrainedSolution:
    """Constrained maximiser from the explicit resolvent formulas.

    Raises
    ------
    SolverError
        If the spectral radius of ``L`` is not below one (outside the
        admissible parameter range).
    """
    n, gam, nu, rho, sig = params.n, params.gamma, params.nu, params.rho, params.sigma
    ci = column_intermediates(params)
    spr = np.max(np.abs(np.linalg.eigvals(ci.L)))
    if not spr < 1:
        raise SolverError(f"spectral radius of L is {spr:.6g} >= 1")
    zS = ci.u * ci.theta_star + ci.v
    mu = (1 - ci.zeta - sig / np.sqrt(n) * ci.a * zS) / (n * ci.Theta)
    rhs = n * mu[None, :] - (gam * sig / np.sqrt(n) * zS)[:, None] * (rho * nu)[None, :]
    rhs[np.diag_indices(n)] += 1 / params.c
    zQ = ci.p * rhs
    iota_cols = mu / nu
    iota = np.append(iota_cols, ci.theta_star - sig / np.sqrt(n) * (rho @ iota_cols))
    return ConstrainedSolution(zQ, zS, mu, ci.theta_star, iota)


@dataclass(frozen=True)
class MMatrixReport:
    spectral_radius: float
    min_resolvent_entry: float
    L_nonneg: bool
    weighted_gap: np.ndarray
    expected_gap: float
    weighted_row_test: bool
    neumann_deviation: float


def m_matrix_diagnostics(params: ModelParams, neumann_terms: int = 50) -> MMatrixReport:
    """Check that ``I - L`` is a nonsingular M-matrix.

    ``weighted_gap`` is ``phi - L^T phi``, which should equal the constant
    ``1 - |rho|^2 / n`` in every entry.  ``neumann_deviation`` compares the
    direct resolvent with a truncated Neumann series; the truncation error
    is of order ``spectral_radius ** (neumann_terms + 1)``.
    """
    ci = column_intermediates(params)
    L = ci.L
    spr = float(np.max(np.abs(np.linalg.eigvals(L))))
    gap = ci.phi - L.T @ ci.phi
    expected = 1 - (params.rho**2).sum() / params.n
    S = np.eye(params.n)
    term = np.eye(params.n)
    for _ in range(neumann_terms):
        term = term @ L
        S = S + term
    return MMatrixReport(
        spectral_radius=spr,
        min_resolvent_entry=float(ci.resolvent.min()),
        L_nonneg=bool(np.all(L >= 0)),
        weighted_gap=gap,
        expected_gap=float(expected),
        weighted_row_test=bool(np.all(gap > 0)),
        neumann_deviation=float(np.max(np.abs(S - ci.resolvent))),
    )


@dataclass(frozen=True)
class DiagSignRow:
    row: int
    baseline: float
    correction: float
    B: float
    threshold: float
    classification: str
    zQ_bar_diag: float


def diag_sign_test(params: ModelParams, solution: ConstrainedSolution | None = None) -> list[DiagSignRow]:
    """Per-row diagonal sign discriminant in the constrained limit.

    ``zQ_bar[i, i] = p[i, i] * B_i`` with ``B_i = baseline - correction``.
    Classifications:

    * ``"positive: zero correlation"`` when ``rho_i == 0``;
    * ``"positive: standard tilt"`` when the tilt opposes ``rho_i`` (or is 0);
    * ``"negative diagonal"`` when the tilt is aligned with ``rho_i`` and
      exceeds the threshold magnitude;
    * ``"positive: aligned tilt below threshold"`` otherwise.
    """
    n, c, gam, nu, rho, sig = params.n, params.c, params.gamma, params.nu, params.rho, params.sigma
    ci = column_intermediates(params)
    sol = solve_explicit_column(params) if solution is None else solution
    zS = sol.zS_bar
    rows = []
    for i in range(n):
        pii = ci.p[i, i]
        baseline = (1 - ci.zeta[i]) / ci.Theta[i] + 1 / c[i]
        slope = gam[i] * nu[i] + pii / (c[i] * nu[i] * ci.Theta[i])
        correction = sig / np.sqrt(n) * zS[i] * rho[i] * slope
        B = baseline - correction
        if rho[i] == 0:
            threshold, cls = np.inf, "positive: zero correlation"
        else:
            threshold = np.sqrt(n) / (sig * abs(rho[i]) * slope) * baseline
            if np.sign(zS[i]) != np.sign(rho[i]):
                cls = "positive: standard tilt"
            elif abs(zS[i]) > threshold:
                cls = "negative diagonal"
            else:
                cls = "positive: aligned tilt below threshold"
        rows.append(DiagSignRow(i + 1, float(baseline), float(correction), float(B),
                                float(threshold), cls, float(sol.zQ_bar[i, i])))
    return rows


def mixed_sign_check(solution: ConstrainedSolution, rho, tol: float = 1e-10) -> str:
    """Classify the limiting tilts as ``all_zero``, ``mixed`` or ``violation``.

    Returns ``not_applicable`` unless all correlations share one sign and
    are not all zero.
    """
    rho = np.asarray(rho, dtype=float)
    if not (np.all(rho >= 0) or np.all(rho <= 0)) or np.all(rho == 0):
        return "not_applicable"
    z = solution.zS_bar
    if np.max(np.abs(z)) <= tol:
        return "all_zero"
    if np.any(z > tol) and np.any(z < -tol):
        return "mixed"
    return "violation"


@dataclass(frozen=True)
class ConvergenceRow:
    gamma_P: float
    resid_W: float
    err_x: float
    err_iota: float
    gap_g: float

    @property
    def scaled(self) -> tuple[float, float, float, float]:
        g = self.gamma_P
        return g * self.resid_W, g * self.err_x, g * self.err_iota, g * self.gap_g


def penalty_convergence_study(params: ModelParams, gamma_P_list) -> list[ConvergenceRow]:
    """Distance of the penalised maximiser to the constrained one along ``gamma_P``.

    For each ``gamma_P``: the weighted constraint residual, the solution
    error, the error of the scaled multiplier ``-gamma_P W (O x - o)``
    against the KKT multiplier, and the gap in ``g``.
    """
    gl = np.asarray(gamma_P_list, dtype=float)
    if gl.size == 0:
        raise ValueError("empty gamma_P list")
    if np.any(gl <= 0):
        raise ValueError("gamma_P values must be > 0")
    if np.any(np.diff(gl) <= 0):
        raise ValueError("gamma_P grid must increase")
    op = build_constraint_operator(params)
    star = solve_kkt(params)
    x_star = star.sensitivities.to_vector()
    g_star, _ = eval_g_phi(params, star.sensitivities)
    out = []
    for gP in gl:
        s = solve_direct(params.with_gamma_P(float(gP)))
        x = s.to_vector()
        r = op.residual(x)
        iota_hat = -gP * op.W @ r
        g_val, _ = eval_g_phi(params, s)
        out.append(ConvergenceRow(
            gamma_P=float(gP),
            resid_W=float(np.sqrt(r @ op.W @ r)),
            err_x=float(np.linalg.norm(x - x_star)),
            err_iota=float(np.linalg.norm(iota_hat - star.iota)),
            gap_g=float(abs(g_star - g_val)),
        ))
    return out
