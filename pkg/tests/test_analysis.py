import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bernreg.analysis import (
    CurveEstimate,
    ErrorMetrics,
    autocorrelation,
    default_grid,
    diagnostics,
    effective_sample_size,
    error_metrics,
    l1_norm_series,
    order_posterior,
    posterior_mean_curve,
    trace_curves,
    write_acf,
    write_metrics,
)
from bernreg.bernstein import BernsteinPoly, ShapeClass, poly_eval
from bernreg.errors import DegenerateInputError, DomainError
from bernreg.model import TestFunction, true_fn_eval, generate_dataset, NoiseModel, empirical_hyperparams
from bernreg.samplers import ChainTrace, SamplerConfig, read_trace, run_chain, write_trace


def make_trace(states, n_max=20):
    orders = np.array([len(s) - 1 for s in states])
    coeffs = np.full((len(states), n_max + 1), np.nan)
    for i, s in enumerate(states):
        coeffs[i, : len(s)] = s
    return ChainTrace(orders, coeffs, {"H": 0}, {"H": 1}, orders.copy())


def ar1(phi, m, rng):
    e = rng.standard_normal(m)
    x = np.empty(m)
    x[0] = e[0] / np.sqrt(1 - phi**2)
    for t in range(1, m):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_posterior_mean_single_state():
    grid = default_grid(11)
    est = posterior_mean_curve(make_trace([[0.0, 1.0, 3.0]]), grid)
    np.testing.assert_allclose(est.values, poly_eval(BernsteinPoly([0.0, 1.0, 3.0]), grid), atol=1e-14)


def test_posterior_mean_two_states_by_hand():
    grid = np.array([0.0, 0.5, 1.0])
    est = posterior_mean_curve(make_trace([[0.0, 1.0], [1.0, 1.0, 2.0]]), grid)
    # t = 0.5: first curve 0.5, second 0.25 + 0.5 + 0.5 = 1.25
    np.testing.assert_allclose(est.values, [0.5, 0.875, 1.5], atol=1e-15)


def test_posterior_mean_matches_average_of_curves(rng):
    states = [np.sort(rng.uniform(size=rng.integers(2, 9))) for _ in range(50)]
    trace = make_trace(states)
    grid = default_grid(101)
    est = posterior_mean_curve(trace, grid)
    np.testing.assert_allclose(est.values, trace_curves(trace, grid).mean(axis=0), atol=1e-13)
    assert np.all(np.diff(est.values) >= -1e-10)


def test_posterior_mean_of_concave_states_is_concave(rng):
    states = []
    for _ in range(30):
        d = np.sort(rng.uniform(-1, 1, rng.integers(2, 10)))[::-1]
        d[0], d[-1] = abs(d[0]) + 0.1, -abs(d[-1]) - 0.1
        states.append(np.concatenate(([0.0], np.cumsum(d))))
    est = posterior_mean_curve(make_trace(states), default_grid(201))
    assert np.all(np.diff(est.values, 2) <= 1e-8)


def test_posterior_mean_empty_trace():
    with pytest.raises(DegenerateInputError):
        posterior_mean_curve(ChainTrace(np.empty(0, int), np.empty((0, 3)), {}, {}, np.empty(0)))


def test_curve_estimate_validation():
    with pytest.raises(DomainError):
        CurveEstimate(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(DomainError):
        CurveEstimate(np.array([0.0, 1.0]), np.array([0.0, np.inf]))


def test_error_metrics_examples():
    grid = default_grid()
    f = TestFunction.F1
    exact = CurveEstimate(grid, true_fn_eval(f, grid))
    assert error_metrics(exact, f) == ErrorMetrics(0.0, 0.0, 0.0)
    shifted = error_metrics(CurveEstimate(grid, true_fn_eval(f, grid) + 0.2), f)
    assert shifted.l1 == pytest.approx(0.2) and shifted.sup == pytest.approx(0.2) and shifted.mse == pytest.approx(0.04)
    zero_vs_f2 = error_metrics(CurveEstimate(grid, np.zeros(grid.size)), TestFunction.F2)
    assert zero_vs_f2.l1 == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DomainError):
        error_metrics(CurveEstimate(np.linspace(0, 0.5, 11), np.zeros(11)), f)


def test_error_metrics_at_design_points():
    grid = default_grid()
    est = CurveEstimate(grid, true_fn_eval(TestFunction.F3, grid) + 0.1)
    m = error_metrics(est, TestFunction.F3, mse_points=[0.1, 0.2, 0.9])
    assert m.mse == pytest.approx(0.01)


@settings(max_examples=60)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12), st.sampled_from(list(TestFunction)))
def test_error_metric_inequalities(coeffs, f):
    grid = default_grid(201)
    m = error_metrics(CurveEstimate(grid, poly_eval(BernsteinPoly(coeffs), grid)), f)
    assert m.l1 <= m.sup + 1e-12
    assert m.mse <= m.sup**2 + 1e-12


def test_order_posterior_counts():
    assert order_posterior(make_trace([[0, 1] * 4 + [0]] * 3)) == {8: 1.0}
    trace = make_trace([[0, 1], [0, 1, 2], [0, 1], [0, 1, 2, 3]])
    assert order_posterior(trace) == {1: 0.5, 2: 0.25, 3: 0.25}


def test_acf_of_iid_series(rng):
    rho = autocorrelation(rng.standard_normal(100_000), 50)
    assert np.all(np.abs(rho) < 0.02)


def test_acf_of_alternating_series():
    m = 1000
    rho = autocorrelation((-1.0) ** np.arange(m), 3)
    assert rho[0] == pytest.approx(-1, abs=2 / m)
    assert rho[1] == pytest.approx(1, abs=3 / m)


def test_acf_matches_direct_definition(rng):
    s = rng.standard_normal(300)
    c = s - s.mean()
    direct = [np.sum(c[: -k] * c[k:]) / np.sum(c * c) for k in range(1, 11)]
    np.testing.assert_allclose(autocorrelation(s, 10), direct, atol=1e-12)


def test_acf_of_ar1(rng):
    rho = autocorrelation(ar1(0.9, 200_000, rng), 10)
    np.testing.assert_allclose(rho, 0.9 ** np.arange(1, 11), atol=0.03)


def test_acf_errors():
    with pytest.raises(DegenerateInputError):
        autocorrelation(np.ones(50), 5)
    with pytest.raises(DomainError):
        autocorrelation(np.arange(5.0), 5)


def test_ess_iid_and_ar1(rng):
    m = 100_000
    assert abs(effective_sample_size(rng.standard_normal(m)) / m - 1) < 0.1
    phi = 0.9
    ess = effective_sample_size(ar1(phi, m, rng))
    assert abs(ess / (m * (1 - phi) / (1 + phi)) - 1) < 0.2


def test_ess_outlier_and_constant_series():
    s = np.zeros(1000)
    s[500] = 1.0
    ess = effective_sample_size(s)
    assert 0 < ess <= 1000 and np.isfinite(ess)
    with pytest.raises(DegenerateInputError):
        effective_sample_size(np.full(100, 2.0))


def test_l1_norm_series_matches_dense_computation(rng):
    states = [np.sort(rng.uniform(-1, 1, rng.integers(2, 7))) for _ in range(40)]
    trace = make_trace(states)
    grid = default_grid(101)
    dense = trace_curves(trace, grid)
    expected = np.trapezoid(np.abs(dense), grid, axis=1)
    np.testing.assert_allclose(l1_norm_series(trace, grid, chunk=7), expected, rtol=1e-12)
    diff = np.trapezoid(np.abs(dense - true_fn_eval(TestFunction.F1, grid)), grid, axis=1)
    np.testing.assert_allclose(l1_norm_series(trace, grid, TestFunction.F1), diff, rtol=1e-12)


def test_diagnostics_survive_trace_round_trip(tmp_path):
    d = generate_dataset(TestFunction.F1, 50, NoiseModel(0.5), np.random.default_rng(2))
    spec = empirical_hyperparams(d, ShapeClass.MONOTONE)
    trace = run_chain(d, spec, SamplerConfig(updates=3000, burn_in=300, seed=4), 0.25)
    write_trace(trace, tmp_path / "t.json", states_file=tmp_path / "s.bin")
    back = read_trace(tmp_path / "t.json", n_max=20)
    a, b = diagnostics(trace), diagnostics(back)
    assert a.order_pmf_hat == b.order_pmf_hat and a.ess == b.ess and a.acf == b.acf
    assert a.acceptance_rate == b.acceptance_rate
    assert sum(a.order_pmf_hat.values()) == pytest.approx(1.0)
    assert all(abs(r) <= 1 for r in a.acf) and 0 < a.ess <= len(trace)


def test_metric_and_acf_export(tmp_path):
    write_metrics(ErrorMetrics(0.1, 0.3, 0.02), tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text()) == {"l1": 0.1, "sup": 0.3, "mse": 0.02}
    write_acf([0.5, 0.25], tmp_path / "acf.csv")
    assert (tmp_path / "acf.csv").read_text().splitlines() == ["lag,rho", "1,0.5", "2,0.25"]
