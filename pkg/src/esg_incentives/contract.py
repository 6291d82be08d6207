"""Optimal contract, exact terminal sampling, and Monte Carlo equilibrium checks.

With deterministic sensitivities, agent ``i``'s payment is

    constant_i + zQ[i, :] . (Q_T - q0) + zS[i] * log(S_T / s0)

and, under constant actions, ``(Q_T, log S_T)`` is jointly Gaussian, so
every expected exponential utility also has a closed form.  The analytic
functions here (``analytic_*``) compute those from means and variances and
are used as independent comparators for the simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .objective import Sensitivities, eval_f
from .params import ModelParams

__all__ = [
    "ContractCoefficients",
    "PathBundle",
    "optimal_actions",
    "contract_coefficients",
    "simulate_paths",
    "payments",
    "agent_certainty_equivalents",
    "principal_value",
    "nash_deviation_check",
    "analytic_payment_moments",
    "analytic_certainty_equivalents",
    "analytic_principal_value",
    "analytic_deviation_ce",
]

CHUNK = 1 << 16


def optimal_actions(s: Sensitivities, params: ModelParams) -> np.ndarray:
    """Nash actions induced by the loadings: ``a_i = zQ[i, i] / c_i``."""
    return np.diag(s.zQ) / params.c


@dataclass(frozen=True)
class ContractCoefficients:
    """Linear contract ``constant + zQ_row (Q_T - Q_0) + zS log(S_T / S_0)``.

    The paid amount ``xi^i S_T`` equals this bracket.
    """

    constant: np.ndarray
    zQ_row: np.ndarray
    zS: np.ndarray
    actions: np.ndarray


def contract_coefficients(params: ModelParams, s: Sensitivities) -> ContractCoefficients:
    n, c, gam, nu, rho, sig, T = (
        params.n, params.c, params.gamma, params.nu, params.rho, params.sigma, params.T,
    )
    zQ, zS = s.zQ, s.zS
    a = optimal_actions(s, params)
    d = np.diag(zQ)
    cross = zQ @ a - d * a  # sum over j != i of a_j zQ[i, j]
    F = (
        d**2 / (2 * c)
        + cross
        - gam / 2 * (zQ**2 @ nu**2)
        - gam / 2 * sig**2 * zS**2
    )
    hedge = (params.mu - sig**2 / 2) * zS - gam * sig / np.sqrt(n) * zS * (zQ @ (rho * nu))
    constant = params.r - T * F - T * hedge
    return ContractCoefficients(constant=constant, zQ_row=zQ.copy(), zS=zS.copy(), actions=a)


@dataclass(frozen=True)
class PathBundle:
    QT: np.ndarray
    logS_ratio: np.ndarray
    seed: int
    n_paths: int
    actions: np.ndarray


def _normals(n, n_paths, seed):
    # chunked sub-streams keyed by (seed, chunk index): reproducible and
    # independent of how many chunks a caller evaluates
    ss = np.random.SeedSequence(seed)
    n_chunks = -(-n_paths // CHUNK)
    out = np.empty((n_paths, 2 * n))
    for k, child in enumerate(ss.spawn(n_chunks)):
        lo = k * CHUNK
        hi = min(n_paths, lo + CHUNK)
        out[lo:hi] = np.random.default_rng(child).standard_normal((hi - lo, 2 * n))
    return out[:, :n], out[:, n:]


def simulate_paths(params: ModelParams, actions, n_paths: int, seed: int) -> PathBundle:
    """Sample ``(Q_T, log(S_T / s0))`` exactly under constant actions.

    The asset's law does not depend on the actions, and the same seed gives
    the same Brownian increments whatever the actions are.
    """
    if int(n_paths) != n_paths or n_paths < 1:
        raise ValueError(f"n_paths must be a positive integer, got {n_paths}")
    n_paths = int(n_paths)
    n, nu, rho, sig, T = params.n, params.nu, params.rho, params.sigma, params.T
    actions = np.asarray(actions, dtype=float)
    if actions.shape != (n,):
        raise ValueError(f"actions must have shape ({n},)")
    B, W = _normals(n, n_paths, seed)
    sq = np.sqrt(T)
    QT = params.q0 + actions * T + nu * sq * B
    logS = (params.mu - sig**2 / 2) * T + sig / np.sqrt(n) * sq * (B @ rho + W @ np.sqrt(1 - rho**2))
    return PathBundle(QT=QT, logS_ratio=logS, seed=seed, n_paths=n_paths, actions=actions)


def payments(params: ModelParams, coeffs: ContractCoefficients, bundle: PathBundle) -> np.ndarray:
    """Per-path payments, shape ``(n_paths, n)``."""
    dQ = bundle.QT - params.q0
    return coeffs.constant + dQ @ coeffs.zQ_row.T + np.outer(bundle.logS_ratio, coeffs.zS)


def _exp_utility_stats(x, gamma):
    """Mean of ``-exp(-gamma x)`` on the log scale, and CE with delta-method SE."""
    N = x.shape[0]
    z = -gamma * x
    log_mean = logsumexp(z) - np.log(N)  # log E[exp(-gamma x)]
    ce = -log_mean / gamma
    ratio = np.exp(z - log_mean)  # Y / mean(Y)
    se = np.std(ratio, ddof=1) / np.sqrt(N) / gamma
    return log_mean, ce, se


@dataclass(frozen=True)
class CertaintyEquivalent:
    ce: float
    se: float


def agent_certainty_equivalents(
    params: ModelParams, coeffs: ContractCoefficients, bundle: PathBundle
) -> list[CertaintyEquivalent]:
    """Monte Carlo certainty equivalent of each agent's net payoff."""
    net = payments(params, coeffs, bundle) - params.c / 2 * bundle.actions**2 * params.T
    out = []
    for i in range(params.n):
        _, ce, se = _exp_utility_stats(net[:, i], params.gamma[i])
        out.append(CertaintyEquivalent(float(ce), float(se)))
    return out


@dataclass(frozen=True)
class PrincipalValue:
    mc: float
    se: float
    analytic: float


def principal_value(
    params: ModelParams, coeffs: ContractCoefficients, bundle: PathBundle, f_star: float | None = None
) -> PrincipalValue:
    """Expected utility of the principal's average net position.

    The analytic comparator is ``-exp(-gamma_P (1.(q0 - r)/n + T f*))`` with
    ``f*`` evaluated at the contract's sensitivities.  For ``gamma_P = 0``
    the risk-neutral expectation of the average net position is reported
    instead (``mc``, ``analytic`` are then expected values, not utilities).
    """
    gP = params.gamma_P
    n = params.n
    if f_star is None:
        f_star = eval_f(params, Sensitivities(coeffs.zQ_row, coeffs.zS))
    X = (bundle.QT.sum(axis=1) - payments(params, coeffs, bundle).sum(axis=1)) / n
    base = (params.q0 - params.r).sum() / n + params.T * f_star
    N = X.shape[0]
    if gP == 0:
        return PrincipalValue(float(X.mean()), float(X.std(ddof=1) / np.sqrt(N)), float(base))
    U = -np.exp(-gP * X)
    return PrincipalValue(float(U.mean()), float(U.std(ddof=1) / np.sqrt(N)), float(-np.exp(-gP * base)))


@dataclass(frozen=True)
class DeviationCurve:
    """Agent ``agent``'s expected utility under constant deviations ``delta``.

    ``diff_se[k]`` is the standard error of the paired difference
    ``U(delta_k) - U(0)`` (common random numbers).
    """

    agent: int
    deltas: np.ndarray
    utility: np.ndarray
    se: np.ndarray
    diff_se: np.ndarray
    analytic: np.ndarray

    @property
    def argmax(self) -> float:
        return float(self.deltas[int(np.argmax(self.utility))])

    @property
    def zero_index(self) -> int:
        return int(np.flatnonzero(self.deltas == 0)[0])


def nash_deviation_check(
    params: ModelParams,
    coeffs: ContractCoefficients,
    agent_index: int,
    deviation_grid,
    n_paths: int,
    seed: int,
) -> DeviationCurve:
    """Re-simulate with agent ``agent_index`` (0-based) playing ``a*_i + delta``.

    Only constant deviations are covered.  The other agents stay at their
    equilibrium actions, and every grid point reuses the same seed.
    """
    deltas = np.asarray(deviation_grid, dtype=float)
    if not np.any(deltas == 0):
        raise ValueError("deviation grid must contain 0")
    i = agent_index
    g = params.gamma[i]
    samples = []
    for dlt in deltas:
        act = coeffs.actions.copy()
        act[i] += dlt
        b = simulate_paths(params, act, n_paths, seed)
        pay = payments(params, coeffs, b)[:, i]
        samples.append(-np.exp(-g * (pay - params.c[i] / 2 * act[i] ** 2 * params.T)))
    samples = np.array(samples)
    N = samples.shape[1]
    k0 = int(np.flatnonzero(deltas == 0)[0])
    ce_dev = analytic_deviation_ce(params, coeffs, i, deltas)
    return DeviationCurve(
        agent=i,
        deltas=deltas,
        utility=samples.mean(axis=1),
        se=samples.std(axis=1, ddof=1) / np.sqrt(N),
        diff_se=(samples - samples[k0]).std(axis=1, ddof=1) / np.sqrt(N),
        analytic=-np.exp(-g * ce_dev),
    )


# -- Gaussian closed forms ---------------------------------------------------


def analytic_payment_moments(params: ModelParams, coeffs: ContractCoefficients, actions=None):
    """Mean vector and covariance matrix of the payments under ``actions``."""
    n, nu, rho, sig, T = params.n, params.nu, params.rho, params.sigma, params.T
    a = coeffs.actions if actions is None else np.asarray(actions, dtype=float)
    # payment_i = const_i + zQ[i].(a T + nu sqrt(T) B) + zS_i (m T + sig/sqrt(n) sqrt(T)(rho.B + sqrt(1-rho^2).W))
    mean = coeffs.constant + coeffs.zQ_row @ a * T + coeffs.zS * (params.mu - sig**2 / 2) * T
    load_B = coeffs.zQ_row * nu + np.outer(coeffs.zS, rho) * sig / np.sqrt(n)
    load_W = np.outer(coeffs.zS, np.sqrt(1 - rho**2)) * sig / np.sqrt(n)
    cov = T * (load_B @ load_B.T + load_W @ load_W.T)
    return mean, cov


def analytic_certainty_equivalents(params: ModelParams, coeffs: ContractCoefficients) -> np.ndarray:
    """Agents' certainty equivalents from Gaussian mean/variance of net pay."""
    mean, cov = analytic_payment_moments(params, coeffs)
    net_mean = mean - params.c / 2 * coeffs.actions**2 * params.T
    return net_mean - params.gamma / 2 * np.diag(cov)


def analytic_deviation_ce(params: ModelParams, coeffs: ContractCoefficients, agent_index: int, deltas):
    """Agent's certainty equivalent when deviating by each constant ``delta``."""
    out = []
    for dlt in np.atleast_1d(deltas):
        act = coeffs.actions.copy()
        act[agent_index] += dlt
        mean, cov = analytic_payment_moments(params, coeffs, act)
        i = agent_index
        out.append(mean[i] - params.c[i] / 2 * act[i] ** 2 * params.T - params.gamma[i] / 2 * cov[i, i])
    return np.array(out)


def analytic_principal_value(params: ModelParams, coeffs: ContractCoefficients) -> float:
    """Principal's expected utility from the Gaussian law of the net position."""
    n, nu, rho, sig, T = params.n, params.nu, params.rho, params.sigma, params.T
    a = coeffs.actions
    ones = np.ones(n)
    zq_col = ones @ coeffs.zQ_row  # column sums
    zs_tot = coeffs.zS.sum()
    mean_pay, _ = analytic_payment_moments(params, coeffs)
    mean_X = ((params.q0 + a * T).sum() - mean_pay.sum()) / n
    load_B = (nu - zq_col * nu - zs_tot * sig / np.sqrt(n) * rho) / n
    load_W = -zs_tot * sig / np.sqrt(n) * np.sqrt(1 - rho**2) / n
    var_X = T * ((load_B**2).sum() + (load_W**2).sum())
    gP = params.gamma_P
    if gP == 0:
        return float(mean_X)
    return float(-np.exp(-gP * (mean_X - gP / 2 * var_X)))
