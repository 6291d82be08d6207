"""Acceptance suite: one test per criterion, each timed against its budget."""

import csv

import numpy as np
import pytest

from conftest import criterion
from economies import log_uniform, random_params, random_point
from esg_incentives.constrained import (
    m_matrix_diagnostics,
    mixed_sign_check,
    penalty_convergence_study,
    solve_explicit_column,
    solve_kkt,
)
from esg_incentives.contract import (
    agent_certainty_equivalents,
    contract_coefficients,
    nash_deviation_check,
    principal_value,
    simulate_paths,
)
from esg_incentives.experiments import figure_data, flip_threshold
from esg_incentives.foc_solver import (
    _fd_gradient,
    _fd_hessian,
    brute_force_maximize,
    solve,
    solve_closed_form,
    solve_direct,
)
from esg_incentives.homogeneous import closed_form_homogeneous, gp_infinity_limits, n1_benchmark
from esg_incentives.objective import (
    eval_f,
    eval_f_batch,
    eval_f_decomposed,
    eval_g_phi,
    gradient,
    hessian_blocks,
)
from esg_incentives.params import homogeneous_params, preset
from esg_incentives.row_decoupled import gp0_heterogeneous, persistence_scan, sign_pattern

TABLES = ("table1", "table2", "table3")


def rel_err(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def test_criterion_01_algebraic_identities():
    rng = np.random.default_rng(101)
    with criterion(1, "f == decomposed f == g - (gamma_P/2) phi, 500 pairs, rel 1e-12", 1.0):
        worst = 0.0
        for _ in range(500):
            p = random_params(rng)
            s = random_point(rng, p.n)
            f = eval_f(p, s)
            g, phi = eval_g_phi(p, s)
            worst = max(worst, rel_err(f, eval_f_decomposed(p, s)), rel_err(f, g - p.gamma_P / 2 * phi))
        assert worst <= 1e-12, worst


def test_criterion_02_derivatives():
    rng = np.random.default_rng(202)
    with criterion(2, "gradient and Hessian vs finite differences, concavity, 200 economies", 10.0):
        for k in range(200):
            p = random_params(rng, n=1 + k % 8)
            s = random_point(rng, p.n)
            x = s.to_vector()
            fun = lambda X: eval_f_batch(p, X)  # noqa: E731
            g = gradient(p, s).to_vector()
            fd_g = _fd_gradient(fun, x, 1e-6)
            assert np.max(np.abs(g - fd_g)) <= 1e-6 * max(1.0, np.abs(g).max())
            H = hessian_blocks(p).H
            fd_H = _fd_hessian(fun, x, 1e-2)
            assert np.max(np.abs(H - fd_H)) <= 1e-6 * max(1.0, np.abs(H).max())
            assert np.array_equal(H, H.T)
            assert np.linalg.eigvalsh(H).max() <= 1e-10


def test_criterion_03_solver_equivalence():
    rng = np.random.default_rng(303)
    gammas = np.concatenate([[1e-3, 1e3], log_uniform(rng, 1e-3, 1e3, 198)])
    with criterion(3, "direct == closed form (1e-10) == brute force (1e-6), 200 economies", 30.0):
        for gP in gammas:
            p = random_params(rng, gamma_P=float(gP))
            d = solve_direct(p).to_vector()
            c = solve_closed_form(p).to_vector()
            b = brute_force_maximize(p).to_vector()
            assert np.max(np.abs(d - c)) <= 1e-10
            assert np.max(np.abs(d - b)) <= 1e-6
            assert np.max(np.abs(c - b)) <= 1e-6


def _rational_gp0(n, c, g, nu, rho, sig):
    # D = c gamma n (1 - rho^2) nu^2 + n (1 - rho^2) + rho^2
    D = c * g * n * (1 - rho**2) * nu**2 + n * (1 - rho**2) + rho**2
    z_s = -np.sqrt(n) * rho * nu / (sig * D)
    z_o = rho**2 / D
    z_d = (1 + g * c * nu**2 * rho**2 / D) / (1 + c * g * nu**2)
    return D, z_s, z_o, z_d


def test_criterion_04_homogeneous_desk_numbers():
    with criterion(4, "Table 1 closed forms at gamma_P = 0, infinity, and n = 1", 1.0):
        D, zs_r, zo_r, zd_r = _rational_gp0(6, 1.2, 1.0, 1.0, 0.6, 1.0)
        assert D == pytest.approx(8.808, abs=1e-12)
        assert (zs_r, zo_r, zd_r) == pytest.approx((-0.16686, 0.04087, 0.47684), abs=1e-5)
        h = closed_form_homogeneous(6, 1.2, 1.0, 1.0, 0.6, 1.0, 0.0)
        assert (h.z_s, h.z_o, h.z_d) == pytest.approx((zs_r, zo_r, zd_r), abs=1e-12)
        s = solve_direct(preset("table1").with_gamma_P(0.0))
        assert (s.zS[0], s.zQ[0, 1], s.zQ[0, 0]) == pytest.approx((-0.16686, 0.04087, 0.47684), abs=1e-5)
        z_s, z_o, z_d = gp_infinity_limits(6, 1.2, 1.0, 1.0)
        assert (z_s, z_o, z_d) == pytest.approx((0.0, 0.098361, 0.508197), abs=1e-6)
        assert z_d + 5 * z_o == pytest.approx(1.0, abs=1e-15)
        D1, zs1_r, _, zd1_r = _rational_gp0(1, 1.2, 1.0, 1.0, 0.6, 1.0)
        assert D1 == pytest.approx(1.768, abs=1e-12)
        z_s1, z_d1 = n1_benchmark(1.2, 1.0, 1.0, 0.6, 1.0, 0.0)
        assert (z_s1, z_d1) == pytest.approx((-0.339367, 0.565611), abs=1e-6)
        assert (z_s1, z_d1) == pytest.approx((zs1_r, zd1_r), abs=1e-12)


def test_criterion_05_sign_properties():
    rng = np.random.default_rng(505)
    grid = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 30)])
    with criterion(5, "homogeneous signs, gamma_P -> 0 signs, small-gamma_P persistence", 30.0):
        # homogeneous: random scalars plus Table 1
        cases = [(6, 1.2, 1.0, 1.0, 0.6, 1.0)]
        for _ in range(100):
            n = int(rng.integers(1, 13))
            c, g, nu, sig = log_uniform(rng, 0.2, 5, 4)
            cases.append((n, c, g, nu, rng.uniform(-0.95, 0.95), sig))
        for n, c, g, nu, rho, sig in cases:
            prev = np.inf
            for gP in grid:
                z_s, z_o, z_d, _ = closed_form_homogeneous(n, c, g, nu, rho, sig, gP)
                assert np.sign(z_s) == -np.sign(rho)
                assert z_d > 0
                assert n == 1 or z_o >= 0
                assert abs(z_s) <= prev * (1 + 1e-12)
                prev = abs(z_s)
            # the closed form is the general solver's answer
            s = solve_direct(homogeneous_params(n, c, g, nu, rho, sig, 1.0))
            assert s.zS[0] == pytest.approx(closed_form_homogeneous(n, c, g, nu, rho, sig, 1.0).z_s, abs=1e-9)
        # heterogeneous gamma_P -> 0
        econs = [preset(t) for t in TABLES] + [random_params(rng) for _ in range(100)]
        for p in econs:
            sol = gp0_heterogeneous(p)
            assert sign_pattern(sol.sensitivities(), p.rho).all_hold
            assert np.all((sol.pi >= 0) & (sol.pi < p.n))
        # persistence for small gamma_P
        for p in econs[3:]:
            assert persistence_scan(p, np.geomspace(1e-9, 1e-6, 4)).bound >= 1e-9
        assert persistence_scan(preset("table1"), np.arange(0, 10.001, 0.25)).first_flip is None
        t2 = persistence_scan(preset("table2"), np.round(np.arange(1, 4001) * 0.01, 10))
        assert t2.bound >= 0.01
        t3 = persistence_scan(preset("table3"), np.round(np.arange(1, 201) * 0.01, 10), "diagonal")
        assert 0.62 <= t3.bound <= 0.63


def test_criterion_06_constrained_limit_table2():
    p = preset("table2")
    with criterion(6, "Table 2 KKT == explicit column, constraints, M-matrix, mixed signs", 5.0):
        a, b = solve_kkt(p), solve_explicit_column(p)
        assert np.max(np.abs(a.sensitivities.to_vector() - b.sensitivities.to_vector())) <= 1e-9
        for sol in (a, b):
            assert abs(sol.zS_bar.sum()) <= 1e-12
            assert np.max(np.abs(sol.zQ_bar.sum(axis=0) - 1)) <= 1e-12
        rep = m_matrix_diagnostics(p)
        assert rep.L_nonneg
        assert rep.weighted_row_test
        assert np.max(np.abs(rep.weighted_gap - (1 - (p.rho**2).sum() / p.n))) <= 1e-12
        assert rep.spectral_radius < 1
        assert rep.min_resolvent_entry >= -1e-12
        assert mixed_sign_check(a, p.rho) == "mixed"


def test_criterion_07_penalty_rates():
    p = preset("table2")
    with criterion(7, "gamma_P-scaled penalty errors stable within 2x; gamma_P = 1e6 near KKT", 5.0):
        rows = penalty_convergence_study(p, [1e2, 1e3, 1e4])
        scaled = np.array([r.scaled for r in rows])
        assert np.all(scaled > 0)
        assert np.all(scaled.max(axis=0) / scaled.min(axis=0) < 2), scaled
        x = solve_direct(p.with_gamma_P(1e6)).to_vector()
        assert np.max(np.abs(x - solve_kkt(p).sensitivities.to_vector())) <= 1e-4


def test_criterion_08_flip_threshold():
    p = preset("table3")
    with criterion(8, "Table 3 row 3 flip threshold 0.629 +- 0.01, limiting diagonal < 0", 10.0):
        r = flip_threshold(p, 3, bracket=(0.1, 2.0), tol=1e-4)
        assert r.gamma_P_dagger == pytest.approx(0.629, abs=0.01)
        assert solve_kkt(p).zQ_bar[2, 2] < 0


def _column(rows, key):
    return np.array([float(r[key]) for r in rows])


def test_criterion_09_figure_data(tmp_path):
    with criterion(9, "fig3/fig4/fig5 CSVs on their grids with shape checks", 30.0):
        written = {name: figure_data(name, tmp_path) for name in ("fig3", "fig4", "fig5")}
        fig3 = list(csv.DictReader(written["fig3"]["sweep"].open()))
        assert np.allclose(_column(fig3, "gamma_P"), np.arange(41) * 0.25)
        fig5 = list(csv.DictReader(written["fig5"]["sweep"].open()))
        g5 = _column(fig5, "gamma_P")
        assert g5[0] == 0 and np.all(np.diff(g5) > 0)
        fig4 = list(csv.DictReader(written["fig4"]["sweep"].open()))
        g4 = _column(fig4, "gamma_P")
        assert np.array_equal(g4, np.arange(41.0))
        tilt = np.abs(_column(fig4, "sum_zS"))
        assert tilt[0] / tilt[40] > 5
        dev = np.max(np.abs(np.column_stack([_column(fig4, f"colsum_{j}") for j in range(1, 7)]) - 1), axis=1)
        assert dev[1] / dev[40] > 5
        assert written["fig4"]["constrained"].exists()


def test_criterion_10_monte_carlo_equilibrium():
    p = preset("table1").with_gamma_P(1.0)
    assert np.all(p.r == 0)
    with criterion(10, "Table 1 Monte Carlo: participation, principal value, deviations", 60.0):
        s = solve(p)
        co = contract_coefficients(p, s)
        bundle = simulate_paths(p, co.actions, 100_000, 20240601)
        for ce in agent_certainty_equivalents(p, co, bundle):
            assert abs(ce.ce) <= 3 * ce.se
        pv = principal_value(p, co, bundle)
        assert pv.analytic == pytest.approx(
            -np.exp(-p.gamma_P * ((p.q0 - p.r).sum() / p.n + p.T * eval_f(p, s))), rel=1e-14
        )
        assert abs(pv.mc - pv.analytic) <= 3 * pv.se
        grid = np.round(np.arange(-4, 5) * 0.05, 10)
        step = 0.05
        for i in range(p.n):
            curve = nash_deviation_check(p, co, i, grid, 100_000, 777 + i)
            k0 = curve.zero_index
            best = int(np.argmax(curve.utility))
            assert abs(curve.deltas[best]) <= step
            assert curve.utility[best] - curve.utility[k0] <= 3 * curve.diff_se[best]
            for k in (0, len(grid) - 1):
                assert curve.utility[k0] - curve.utility[k] > 3 * curve.diff_se[k]
