"""Tests for the three filter designs against independent oracles.

Oracles used here, deliberately implemented apart from the production code:
* scipy.optimize.linprog for the upper-bound linear program;
* brute-force vertex enumeration for tiny LP instances;
* projected gradient descent on the dense bias metric (with a closed-form
  box-plus-budget projection) for the direct design.
"""
import numpy as np
import pytest
from scipy.optimize import linprog

from fairfilt.design import (DesignConfig, all_pass, design_closed_form, design_direct,
                             design_matrix, design_polynomial, filter_from_json,
                             filter_to_json, monomial_coeffs, objective_report)
from fairfilt.errors import DomainError
from fairfilt.graph import normalized_operators
from fairfilt.metrics import BiasContext, bias_context, bias_metric, bias_metric_dense
from fairfilt.spectral import decompose

from conftest import random_connected_graph, random_sensitive


def make_context(weights, eigenvalues=None):
    """BiasContext from raw bound coefficients (s_tilde folded into weights)."""
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.shape[0]
    if eigenvalues is None:
        eigenvalues = np.zeros(n)
    s_tilde = weights / np.abs(1.0 - eigenvalues)
    return BiasContext(s_tilde=s_tilde, eigenvalues=np.asarray(eigenvalues, dtype=float),
                       weights=weights, n=n)


def graph_context(rng, n, p):
    g = random_connected_graph(rng, n, p)
    spec = decompose(normalized_operators(g))
    s = random_sensitive(rng, n)
    return spec, s, bias_context(spec, s)


def project_box_budget(point, min_total):
    """Euclidean projection onto {0 <= h <= 1, sum(h) >= min_total}."""
    clipped = np.clip(point, 0.0, 1.0)
    if clipped.sum() >= min_total:
        return clipped
    lo, hi = 0.0, float(min_total - point.min())
    for _ in range(200):
        shift = 0.5 * (lo + hi)
        if np.clip(point + shift, 0.0, 1.0).sum() < min_total:
            lo = shift
        else:
            hi = shift
    return np.clip(point + hi, 0.0, 1.0)


def pgd_direct_oracle(spec, s, tau, iters=20000, tol=1e-12):
    """Accelerated projected gradient on the dense bias metric squared.

    Independent of the production water-filling path: the gradient comes
    from the dense matrix products and the projection from the closed-form
    box-plus-budget projection above.
    """
    n = spec.n
    v = spec.eigenvectors
    gains = (s @ v) * (1.0 - spec.eigenvalues)  # row vector of the dense product
    lipschitz = 2.0 * float(np.max(gains ** 2)) + 1e-12
    step = 1.0 / lipschitz

    def dense_objective(point):
        return float(np.sum(((gains * point) @ v.T) ** 2))

    h = np.full(n, max(tau, 0.0))
    lookahead = h.copy()
    momentum = 1.0
    best = dense_objective(h)
    stagnant = 0
    for _ in range(iters):
        residual = (gains * lookahead) @ v.T  # s^T V (I - Lambda) diag(h) V^T
        grad = 2.0 * gains * (residual @ v)
        new_h = project_box_budget(lookahead - step * grad, n * tau)
        value = dense_objective(new_h)
        if value > best:
            stagnant += 1
            if stagnant >= 100:
                break
            lookahead = h.copy()
            momentum = 1.0
            continue
        momentum_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
        lookahead = new_h + ((momentum - 1.0) / momentum_next) * (new_h - h)
        movement = float(np.linalg.norm(new_h - h))
        stagnant = stagnant + 1 if best - value <= 1e-16 * max(best, 1e-30) else 0
        h = new_h
        best = value
        momentum = momentum_next
        if movement < tol or stagnant >= 100:
            break
    return h


def random_feasible(rng, n, tau):
    return project_box_budget(rng.random(n), n * tau)


class TestDesignDirect:
    def test_tau_zero_is_perfectly_fair(self):
        rng = np.random.default_rng(1)
        spec, s, ctx = graph_context(rng, 20, 0.3)
        filt = design_direct(ctx, DesignConfig(tau=0.0))
        assert bias_metric(ctx, filt.response) == 0.0
        assert np.all(filt.response[ctx.weights > 0] == 0.0)
        assert np.all(filt.response[ctx.weights == 0] == 1.0)

    def test_hand_water_filling(self):
        # costs [4, 1, 0, 0], tau 0.75: multiplier 1.6 fills [0.2, 0.8, 1, 1]
        ctx = make_context(np.sqrt([4.0, 1.0, 0.0, 0.0]))
        filt = design_direct(ctx, DesignConfig(tau=0.75))
        assert np.allclose(filt.response, [0.2, 0.8, 1.0, 1.0], atol=1e-7)
        assert bias_metric(ctx, filt.response) ** 2 == pytest.approx(0.8, abs=1e-7)

    def test_tau_one_forces_all_pass(self):
        rng = np.random.default_rng(2)
        _, _, ctx = graph_context(rng, 15, 0.3)
        assert np.all(ctx.weights[1:] > 0)
        filt = design_direct(ctx, DesignConfig(tau=1.0))
        assert np.allclose(filt.response, 1.0, atol=1e-9)

    def test_tau_out_of_range(self):
        ctx = make_context([1.0, 2.0])
        with pytest.raises(DomainError):
            design_direct(ctx, DesignConfig(tau=1.2))
        with pytest.raises(DomainError):
            design_direct(ctx, DesignConfig(tau=-0.1))

    def test_matches_pgd_oracle(self):
        rng = np.random.default_rng(3)
        for trial in range(5):
            n = int(rng.integers(10, 30))
            spec, s, ctx = graph_context(rng, n, 0.3)
            tau = float(rng.uniform(0.2, 0.9))
            filt = design_direct(ctx, DesignConfig(tau=tau))
            oracle = pgd_direct_oracle(spec, s, tau)
            ours = bias_metric_dense(spec, s, filt.response)
            theirs = bias_metric_dense(spec, s, oracle)
            assert abs(ours - theirs) <= 1e-6

    def test_beats_random_feasible_points(self):
        rng = np.random.default_rng(4)
        spec, s, ctx = graph_context(rng, 25, 0.25)
        tau = 0.5
        filt = design_direct(ctx, DesignConfig(tau=tau))
        best = bias_metric(ctx, filt.response)
        for _ in range(500):
            candidate = random_feasible(rng, 25, tau)
            assert best <= bias_metric(ctx, candidate) + 1e-10

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(5)
        _, _, ctx = graph_context(rng, 30, 0.2)
        values = [bias_metric(ctx, design_direct(ctx, DesignConfig(tau=t)).response)
                  for t in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)]
        assert all(a <= b + 1e-10 for a, b in zip(values, values[1:]))

    def test_budget_met(self):
        rng = np.random.default_rng(6)
        _, _, ctx = graph_context(rng, 40, 0.15)
        for tau in (0.0, 0.25, 0.5, 0.9, 1.0):
            filt = design_direct(ctx, DesignConfig(tau=tau))
            assert filt.response.sum() >= 40 * tau - 1e-6
            assert filt.response.min() >= -1e-9
            assert filt.response.max() <= 1.0 + 1e-9


def lp_oracle(weights, tau):
    n = len(weights)
    result = linprog(weights, A_ub=[[-1.0] * n], b_ub=[-n * tau], bounds=(0.0, 1.0),
                     method="highs")
    assert result.status == 0
    return result.fun


def lp_vertex_oracle(weights, tau):
    """Enumerate vertices of the box-plus-budget polytope (tiny n only)."""
    weights = np.asarray(weights, dtype=float)
    n = len(weights)
    best = None
    for mask in range(2 ** n):
        ones = [(mask >> k) & 1 for k in range(n)]
        for fractional in range(-1, n):
            h = np.array(ones, dtype=float)
            if fractional >= 0:
                if ones[fractional] == 1:
                    continue
                value = n * tau - h.sum()
                if not 0.0 <= value <= 1.0:
                    continue
                h[fractional] = value
            if h.sum() < n * tau - 1e-12:
                continue
            cost = float(weights @ h)
            if best is None or cost < best:
                best = cost
    return best


class TestDesignClosedForm:
    def test_hand_instance_half(self):
        ctx = make_context([3.0, 1.0, 2.0, 0.5])
        filt = design_closed_form(ctx, DesignConfig(tau=0.5))
        assert np.array_equal(filt.response, [0.0, 1.0, 0.0, 1.0])
        assert ctx.weights @ filt.response == pytest.approx(
            lp_vertex_oracle([3.0, 1.0, 2.0, 0.5], 0.5), abs=1e-12)

    def test_hand_instance_fractional(self):
        ctx = make_context([3.0, 1.0, 2.0, 0.5])
        filt = design_closed_form(ctx, DesignConfig(tau=0.625))
        assert np.array_equal(filt.response, [0.0, 1.0, 0.5, 1.0])
        assert filt.response.sum() == pytest.approx(4 * 0.625)

    def test_tau_one_keeps_everything(self):
        ctx = make_context([3.0, 1.0, 2.0, 0.5])
        filt = design_closed_form(ctx, DesignConfig(tau=1.0))
        assert np.array_equal(filt.response, np.ones(4))

    def test_ties_break_by_ascending_index(self):
        ctx = make_context([2.0, 2.0, 1.0, 1.0])
        filt = design_closed_form(ctx, DesignConfig(tau=0.25))
        # budget 3 zeros the two tied-largest then the lower-index tied-smallest
        assert np.array_equal(filt.response, [0.0, 0.0, 0.0, 1.0])

    def test_matches_linprog_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n = int(rng.integers(3, 50))
            weights = rng.random(n) * rng.choice([0.1, 1.0, 10.0])
            ctx = make_context(weights)
            for tau in (0.3, 0.5, 0.8):
                filt = design_closed_form(ctx, DesignConfig(tau=tau))
                ours = float(weights @ filt.response)
                assert ours == pytest.approx(lp_oracle(weights, tau), abs=1e-9)
                assert filt.response.sum() >= n * tau - 1e-12

    def test_dominated_by_direct_design(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(8, 30))
            _, _, ctx = graph_context(rng, n, 0.3)
            tau = float(rng.uniform(0.2, 0.95))
            rho_direct = bias_metric(ctx, design_direct(ctx, DesignConfig(tau=tau)).response)
            rho_lp = bias_metric(ctx, design_closed_form(ctx, DesignConfig(tau=tau)).response)
            assert rho_direct <= rho_lp + 1e-10


class TestDesignPolynomial:
    def test_order_one_is_constant_tau(self):
        rng = np.random.default_rng(9)
        _, _, ctx = graph_context(rng, 20, 0.3)
        filt = design_polynomial(ctx, DesignConfig(tau=0.4, order=1))
        assert filt.coeffs.shape == (1,)
        assert filt.coeffs[0] == pytest.approx(0.4, abs=1e-6)
        assert np.allclose(filt.response, 0.4, atol=1e-6)

    def test_full_order_recovers_direct_optimum(self):
        rng = np.random.default_rng(10)
        spec, s, ctx = graph_context(rng, 10, 0.4)
        assert len(np.unique(np.round(spec.eigenvalues, 6))) == 10
        tau = 0.5
        direct = bias_metric(ctx, design_direct(ctx, DesignConfig(tau=tau)).response)
        cfg = DesignConfig(tau=tau, order=10, basis="chebyshev", max_iter=40000, tol=1e-12)
        poly = bias_metric(ctx, design_polynomial(ctx, cfg).response)
        assert poly == pytest.approx(direct, abs=1e-4)
        assert poly >= direct - 1e-8

    def test_monotone_in_order(self):
        rng = np.random.default_rng(11)
        _, _, ctx = graph_context(rng, 40, 0.15)
        cfgs = [DesignConfig(tau=0.6, order=L, basis="chebyshev", max_iter=20000, tol=1e-11)
                for L in (2, 4, 8)]
        rhos = [bias_metric(ctx, design_polynomial(ctx, cfg).response) for cfg in cfgs]
        assert rhos[0] >= rhos[1] - 1e-6
        assert rhos[1] >= rhos[2] - 1e-6

    def test_feasible_and_consistent(self):
        rng = np.random.default_rng(12)
        _, _, ctx = graph_context(rng, 30, 0.2)
        for basis in ("monomial", "chebyshev"):
            filt = design_polynomial(ctx, DesignConfig(tau=0.7, order=4, basis=basis))
            assert filt.response.min() >= -1e-9
            assert filt.response.max() <= 1.0 + 1e-9
            assert filt.response.sum() >= 30 * 0.7 - 1e-6
            rebuilt = design_matrix(ctx.eigenvalues, 4, basis) @ filt.coeffs
            assert np.allclose(rebuilt, filt.response, atol=1e-10)

    def test_chebyshev_matches_monomial_objective(self):
        rng = np.random.default_rng(13)
        _, _, ctx = graph_context(rng, 25, 0.25)
        cfg_m = DesignConfig(tau=0.5, order=3, basis="monomial", max_iter=30000, tol=1e-12)
        cfg_c = DesignConfig(tau=0.5, order=3, basis="chebyshev", max_iter=30000, tol=1e-12)
        rho_m = bias_metric(ctx, design_polynomial(ctx, cfg_m).response)
        rho_c = bias_metric(ctx, design_polynomial(ctx, cfg_c).response)
        assert rho_m == pytest.approx(rho_c, abs=1e-5)

    def test_monomial_coefficient_conversion(self):
        rng = np.random.default_rng(14)
        _, _, ctx = graph_context(rng, 15, 0.3)
        filt = design_polynomial(ctx, DesignConfig(tau=0.6, order=4, basis="chebyshev"))
        mono = monomial_coeffs(filt)
        rebuilt = design_matrix(ctx.eigenvalues, 4, "monomial") @ mono
        assert np.allclose(rebuilt, filt.response, atol=1e-8)

    def test_invalid_order(self):
        ctx = make_context([1.0, 2.0])
        with pytest.raises(DomainError):
            design_polynomial(ctx, DesignConfig(tau=0.5, order=0))


class TestObjectiveReport:
    def test_all_pass_slack(self):
        rng = np.random.default_rng(15)
        g = random_connected_graph(rng, 20, 0.3)
        ops = normalized_operators(g)
        spec = decompose(ops)
        s = random_sensitive(rng, 20)
        ctx = bias_context(spec, s)
        report = objective_report(ctx, all_pass(20))
        assert report.rho == pytest.approx(np.linalg.norm(s @ ops.a_hat), rel=1e-8)
        assert report.budget_slack == pytest.approx(0.0, abs=1e-9)

    def test_zero_filter_at_tau_zero(self):
        ctx = make_context([1.0, 2.0, 3.0])
        filt = design_direct(ctx, DesignConfig(tau=0.0))
        report = objective_report(ctx, filt)
        assert report.rho == 0.0
        assert report.bound == 0.0

    def test_direct_dominates_closed_form(self):
        rng = np.random.default_rng(16)
        _, _, ctx = graph_context(rng, 25, 0.25)
        direct = objective_report(ctx, design_direct(ctx, DesignConfig(tau=0.6)))
        lp = objective_report(ctx, design_closed_form(ctx, DesignConfig(tau=0.6)))
        assert direct.rho <= lp.rho + 1e-10


class TestFilterSerialization:
    def test_frequency_round_trip(self):
        rng = np.random.default_rng(17)
        _, _, ctx = graph_context(rng, 12, 0.4)
        filt = design_direct(ctx, DesignConfig(tau=0.5))
        clone = filter_from_json(filter_to_json(filt))
        assert clone.kind == filt.kind
        assert clone.tau == filt.tau
        assert np.array_equal(clone.response, filt.response)
        assert clone.coeffs is None

    def test_polynomial_round_trip_keys(self):
        rng = np.random.default_rng(18)
        _, _, ctx = graph_context(rng, 12, 0.4)
        filt = design_polynomial(ctx, DesignConfig(tau=0.5, order=3))
        payload = filt.to_dict()
        assert set(payload) == {"kind", "tau", "h_tilde", "order", "basis", "coeffs"}
        clone = filter_from_json(filter_to_json(filt))
        assert np.array_equal(clone.coeffs, filt.coeffs)
        assert clone.basis == "monomial"
        assert clone.order == 3
