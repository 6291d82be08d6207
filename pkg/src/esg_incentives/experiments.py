"""Batch experiments: gamma_P sweeps, flip-threshold search, figure data and CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import bisect

from .constrained import (
    diag_sign_test,
    m_matrix_diagnostics,
    mixed_sign_check,
    penalty_convergence_study,
    solve_explicit_column,
)
from .contract import (
    agent_certainty_equivalents,
    contract_coefficients,
    principal_value,
    simulate_paths,
)
from .foc_solver import SolverError, solve
from .objective import Sensitivities, eval_f
from .params import ModelParams, preset

__all__ = [
    "NoSignChangeError",
    "SweepResult",
    "FlipResult",
    "FIGURES",
    "parse_grid",
    "sweep",
    "flip_threshold",
    "sweep_csv",
    "solve_csv",
    "convergence_csv",
    "constrained_report",
    "simulate_report",
    "figure_data",
]


class NoSignChangeError(SolverError):
    """The tracked diagonal entry keeps one sign over the whole bracket."""


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def parse_grid(text: str) -> np.ndarray:
    """``"start:stop:step"`` to an inclusive, strictly increasing grid.

    The number of points is ``round((stop - start) / step) + 1`` so the
    endpoint survives floating-point division.
    """
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}") from None
    if step <= 0:
        raise ValueError("grid step must be > 0")
    if stop < start:
        raise ValueError("grid must increase (stop < start)")
    m = int(round((stop - start) / step))
    return start + step * np.arange(m + 1)


@dataclass(frozen=True)
class SweepResult:
    """Maximisers along a strictly increasing ``gamma_P`` grid.

    Attributes
    ----------
    grid : ndarray, shape (m,)
    solutions : list of Sensitivities
    sum_zS : ndarray, shape (m,)
        Aggregate asset tilt at each grid point.
    colsums : ndarray, shape (m, n)
        Column sums of ``zQ`` (total loading on each signal).
    f_star : ndarray, shape (m,)
    """

    grid: np.ndarray
    solutions: list
    sum_zS: np.ndarray
    colsums: np.ndarray
    f_star: np.ndarray

    def entry(self, i: int, j: int) -> np.ndarray:
        """Trajectory of ``zQ[i, j]`` (0-based) along the grid."""
        return np.array([s.zQ[i, j] for s in self.solutions])

    def tilt(self, i: int) -> np.ndarray:
        return np.array([s.zS[i] for s in self.solutions])


def sweep(params: ModelParams, grid) -> SweepResult:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("gamma_P grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("gamma_P grid must increase")
    if grid[0] < 0:
        raise ValueError("gamma_P values must be >= 0")
    sols, f = [], []
    for g in grid:
        p = params.with_gamma_P(float(g))
        s = solve(p)
        sols.append(s)
        f.append(eval_f(p, s))
    return SweepResult(
        grid=grid,
        solutions=sols,
        sum_zS=np.array([s.zS.sum() for s in sols]),
        colsums=np.array([s.zQ.sum(axis=0) for s in sols]),
        f_star=np.array(f),
    )


def _sweep_header(n):
    return (
        ["gamma_P"]
        + [f"zS_{i}" for i in range(1, n + 1)]
        + [f"zQ_{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
        + ["sum_zS"]
        + [f"colsum_{j}" for j in range(1, n + 1)]
        + ["f_star"]
    )


def _sweep_row(g, s: Sensitivities, f):
    return [g, *s.zS, *s.zQ.ravel(order="C"), s.zS.sum(), *s.zQ.sum(axis=0), f]


def sweep_csv(result: SweepResult) -> str:
    n = result.solutions[0].n
    rows = (_sweep_row(g, s, f) for g, s, f in zip(result.grid, result.solutions, result.f_star))
    return _to_csv(_sweep_header(n), rows)


def solve_csv(params: ModelParams, s: Sensitivities) -> str:
    """Single-row table in the sweep layout."""
    return _to_csv(_sweep_header(s.n), [_sweep_row(params.gamma_P, s, eval_f(params, s))])


@dataclass(frozen=True)
class FlipResult:
    gamma_P_dagger: float
    bracket: tuple[float, float]
    iterations: int
    method: str


def flip_threshold(
    params: ModelParams,
    row: int,
    bracket=(1e-3, 10.0),
    tol: float = 1e-4,
    max_iter: int = 60,
    scan_points: int = 401,
) -> FlipResult:
    """Locate where the diagonal loading ``zQ[row, row]`` (1-based) changes sign.

    Bisection assumes a single monotone crossing inside ``bracket``.  When
    the endpoint values share a sign, a uniform scan of ``scan_points``
    points looks for an interior crossing, and bisection then runs on the
    first sub-interval that brackets one.

    Raises
    ------
    NoSignChangeError
        If neither the endpoints nor the scan show a sign change.
    """
    n = params.n
    if not 1 <= row <= n:
        raise ValueError(f"row must be in 1..{n}, got {row}")
    a, b = (float(v) for v in bracket)
    if not (0 <= a < b):
        raise ValueError(f"bracket must satisfy 0 <= a < b, got ({a}, {b})")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    k = row - 1

    def diag(g):
        return solve(params.with_gamma_P(g)).zQ[k, k]

    fa, fb = diag(a), diag(b)
    method = "bisection"
    if fa == 0:
        return FlipResult(a, (a, b), 0, method)
    if fb == 0:
        return FlipResult(b, (a, b), 0, method)
    if np.sign(fa) == np.sign(fb):
        pts = np.linspace(a, b, scan_points)
        vals = np.array([diag(g) for g in pts])
        idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
        if idx.size == 0:
            raise NoSignChangeError(
                f"no sign change in zQ[{row},{row}] over gamma_P in [{a}, {b}]"
            )
        a, b = float(pts[idx[0]]), float(pts[idx[0] + 1])
        method = "scan+bisection"
    root, info = bisect(diag, a, b, xtol=tol, maxiter=max_iter, full_output=True, disp=False)
    if not info.converged:
        raise SolverError(f"bisection did not converge in {max_iter} iterations")
    return FlipResult(float(root), (a, b), int(info.iterations), method)


def convergence_csv(params: ModelParams, gamma_P_list) -> str:
    rows = penalty_convergence_study(params, gamma_P_list)
    header = ["gamma_P", "resid_W", "err_x", "err_iota", "gap_g",
              "scaled_resid", "scaled_err", "scaled_iota", "scaled_gap"]
    return _to_csv(header, ([r.gamma_P, r.resid_W, r.err_x, r.err_iota, r.gap_g, *r.scaled] for r in rows))


def constrained_report(params: ModelParams) -> tuple[str, dict]:
    """Per-agent limiting solution as CSV, plus a dict of scalar diagnostics."""
    sol = solve_explicit_column(params)
    rows_diag = diag_sign_test(params, sol)
    n = params.n
    header = (["agent", "zS_bar"] + [f"zQ_bar_{j}" for j in range(1, n + 1)]
              + ["mu_bar", "iota", "diag_B", "diag_threshold", "diag_class"])
    rows = []
    for i in range(n):
        d = rows_diag[i]
        rows.append([str(i + 1), sol.zS_bar[i], *sol.zQ_bar[i], sol.mu_bar[i],
                     sol.iota[i], d.B, d.threshold, d.classification])
    mm = m_matrix_diagnostics(params)
    summary = {
        "theta_star": sol.theta_star,
        "iota_asset": sol.iota[n],
        "tilt_verdict": mixed_sign_check(sol, params.rho),
        "spectral_radius": mm.spectral_radius,
        "min_resolvent_entry": mm.min_resolvent_entry,
        "L_nonneg": mm.L_nonneg,
        "expected_gap": mm.expected_gap,
        "max_gap_deviation": float(np.max(np.abs(mm.weighted_gap - mm.expected_gap))),
    }
    return _to_csv(header, rows), summary


def simulate_report(params: ModelParams, n_paths: int, seed: int) -> tuple[str, dict]:
    """Monte Carlo participation table and principal-value comparison."""
    s = solve(params)
    coeffs = contract_coefficients(params, s)
    bundle = simulate_paths(params, coeffs.actions, n_paths, seed)
    ces = agent_certainty_equivalents(params, coeffs, bundle)
    rows = []
    for i, ce in enumerate(ces):
        ok = abs(ce.ce - params.r[i]) <= 3 * ce.se
        rows.append([str(i + 1), ce.ce, ce.se, params.r[i], "true" if ok else "false"])
    pv = principal_value(params, coeffs, bundle, f_star=eval_f(params, s))
    summary = {
        "principal_mc": pv.mc,
        "principal_se": pv.se,
        "principal_analytic": pv.analytic,
        "principal_pass": abs(pv.mc - pv.analytic) <= 3 * pv.se,
    }
    return _to_csv(["agent", "CE", "SE", "r", "pass"], rows), summary


# Figure presets: calibration and gamma_P grid behind each figure's data.
FIGURES = {
    "fig3": ("table1", "0:10:0.25"),
    "fig4": ("table2", "0:40:1"),
    "fig5": ("table3", "0:5:0.01"),
}


def figure_data(name: str, out_dir) -> dict[str, Path]:
    """Write the CSVs behind a figure preset into ``out_dir``.

    ``fig3`` and ``fig5`` write a sweep; ``fig4`` also writes the
    constrained-limit table; ``fig5`` also writes the row-3 flip threshold.
    """
    if name not in FIGURES:
        raise ValueError(f"unknown figure preset {name!r}; choose from {sorted(FIGURES)}")
    table, grid = FIGURES[name]
    params = preset(table)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    res = sweep(params, parse_grid(grid))
    written["sweep"] = out / f"{name}_sweep.csv"
    written["sweep"].write_text(sweep_csv(res))
    if name == "fig4":
        text, _ = constrained_report(params)
        written["constrained"] = out / f"{name}_constrained.csv"
        written["constrained"].write_text(text)
    if name == "fig5":
        flip = flip_threshold(params, 3)
        written["flip"] = out / f"{name}_flip.csv"
        written["flip"].write_text(_to_csv(["row", "gamma_P_dagger"], [["3", flip.gamma_P_dagger]]))
    return written
