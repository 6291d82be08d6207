"""Closed forms for the symmetric economy (identical agents).

By symmetry the maximiser has three numbers: the common asset tilt ``z_s``,
the common off-diagonal loading ``z_o`` and the common own-signal loading
``z_d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "HomogeneousIntermediates",
    "HomogeneousSolution",
    "homogeneous_intermediates",
    "closed_form_homogeneous",
    "gp0_homogeneous",
    "gp_infinity_limits",
    "n1_benchmark",
]


@dataclass(frozen=True)
class HomogeneousIntermediates:
    A: float
    delta: float
    alpha_n: float
    beta_n: float
    kappa_tilde_n: float
    kappa_n: float
    Delta_n: float
    K_star: float
    eta_n: float
    nu_dagger: float


@dataclass(frozen=True)
class HomogeneousSolution:
    z_s: float
    z_o: float | None
    z_d: float
    K_star: float

    def __iter__(self):
        return iter((self.z_s, self.z_o, self.z_d, self.K_star))


def _nu_dagger(n, c, gamma, rho):
    return math.sqrt((n * (1 - rho**2) + rho**2) / (gamma * c * n * (1 - rho**2)))


def homogeneous_intermediates(n, c, gamma, nu, rho, sigma, gamma_P) -> HomogeneousIntermediates:
    A = gamma + 1 / (c * nu**2)
    delta = 1 / (A * c * nu**2)
    alpha_n = gamma_P / (n * gamma)
    beta_n = sigma * rho / math.sqrt(n)
    kt = A + gamma_P / n * ((n - 1) * A / gamma + 1)
    kappa_n = kt / A
    Delta = (
        (gamma + gamma_P) * (1 - rho**2)
        + gamma * rho**2 * delta / n
        + gamma_P * rho**2 * delta**2 / (n**2 * kappa_n)
    )
    z_s = -rho * gamma / (A * c * sigma * nu * math.sqrt(n) * Delta) * (1 - gamma_P / (n * kt))
    K = (gamma * nu / A - beta_n * delta * z_s) / kappa_n
    eta = rho**2 * ((n - 1) + gamma / A)
    return HomogeneousIntermediates(
        A=A, delta=delta, alpha_n=alpha_n, beta_n=beta_n, kappa_tilde_n=kt,
        kappa_n=kappa_n, Delta_n=Delta, K_star=K, eta_n=eta,
        nu_dagger=_nu_dagger(n, c, gamma, rho),
    )


def closed_form_homogeneous(n, c, gamma, nu, rho, sigma, gamma_P) -> HomogeneousSolution:
    """Return ``(z_s, z_o, z_d, K_star)`` for any ``gamma_P >= 0``.

    ``z_o`` is ``None`` when ``n == 1`` (there is no off-diagonal entry).
    """
    h = homogeneous_intermediates(n, c, gamma, nu, rho, sigma, gamma_P)
    kt = h.kappa_tilde_n
    z_s = -rho * gamma / (h.A * c * sigma * nu * math.sqrt(n) * h.Delta_n) * (1 - gamma_P / (n * kt))
    z_o = (h.alpha_n * h.K_star - h.beta_n * z_s) / nu if n >= 2 else None
    z_d = (gamma_P / n * h.K_star - gamma * h.beta_n * z_s + 1 / (c * nu)) / (nu * h.A)
    return HomogeneousSolution(z_s, z_o, z_d, h.K_star)


def gp0_homogeneous(n, c, gamma, nu, rho, sigma):
    """Exact ``gamma_P = 0`` values ``(z_s0, z_o0, z_d0, nu_dagger)``.

    ``nu_dagger`` is the signal scale at which ``|z_s0|`` peaks as a function
    of ``nu``.
    """
    A = gamma + 1 / (c * nu**2)
    eta = rho**2 * ((n - 1) + gamma / A)
    z_s0 = -math.sqrt(n) / sigma * rho / (A * c * nu) / (n - eta)
    z_o0 = rho**2 / (A * c * nu**2) / (n - eta) if n >= 2 else None
    z_d0 = (1 + gamma * rho**2 / A / (n - eta)) / (A * c * nu**2)
    return z_s0, z_o0, z_d0, _nu_dagger(n, c, gamma, rho)


def gp_infinity_limits(n, c, gamma, nu):
    """Limits ``(0, z_o_inf, z_d_inf)`` as ``gamma_P -> infinity``.

    ``z_o_inf`` is ``None`` for ``n == 1``.  The limits do not depend on
    ``rho`` or ``sigma``, and satisfy ``z_d_inf + (n - 1) z_o_inf == 1``.
    """
    A = gamma + 1 / (c * nu**2)
    den = (n - 1) * A + gamma
    z_o = gamma / den if n >= 2 else None
    z_d = ((n - 1) * A - (n - 2) * gamma) / den
    return 0.0, z_o, z_d


def n1_benchmark(c, gamma, nu, rho, sigma, gamma_P):
    """One-agent closed forms ``(z_s1, z_d1)``."""
    g = gamma + gamma_P
    z_s = -gamma * nu * rho / (sigma * g * (1 + c * nu**2 * g * (1 - rho**2)))
    z_d = (1 + gamma_P * c * nu**2 * (1 - rho**2)) / (1 + g * c * nu**2 * (1 - rho**2))
    return z_s, z_d
