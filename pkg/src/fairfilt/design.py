"""Optimal fairness-aware graph filter designs.

Three designs over the same feasible set (frequency response in [0, 1]^n
with at least n * tau total mass):

* ``design_direct`` minimizes the bias metric itself. Orthonormality makes
  the squared metric separable, so the global minimizer is closed-form
  water-filling with the multiplier found by bisection.
* ``design_closed_form`` minimizes the analytic upper bound instead, a
  linear program whose solution is a greedy walk over the bound
  coefficients sorted descending.
* ``design_polynomial`` restricts the response to degree-(L-1) polynomials
  of the normalized adjacency and minimizes the bias metric over the
  coefficients by accelerated projected gradient descent, with exact
  projections onto the polynomial-feasible set computed by an operator
  splitting (closed-form box-plus-budget projection tied to a cached
  linear solve).

The polynomial solver runs in a whitened basis internally: the eigenbasis
of the objective Hessian, scaled by inverse root curvature. That is a pure
linear reparameterization of the requested basis, and it makes the
gradient iteration converge at useful rates despite the terrible
conditioning of the power ("monomial") design matrix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, DomainError
from .graph import _freeze
from .metrics import BiasContext, bias_metric, bias_metric_upper_bound, check_response

BUDGET_TOL = 1e-6

KIND_FREQUENCY = "frequency_response"
KIND_POLYNOMIAL = "polynomial"
BASES = ("monomial", "chebyshev")


@dataclass(frozen=True)
class DesignConfig:
    """Hyperparameters shared by the designs.

    Attributes:
        tau: Information budget in [0, 1]; lower bound on the average
            frequency response.
        order: Number of polynomial coefficients L (polynomial design only).
        basis: "monomial" (powers of 1 - eigenvalue) or "chebyshev".
        tol: Solver tolerance.
        max_iter: Iteration cap for the polynomial solver.
    """

    tau: float
    order: int = 1
    basis: str = "monomial"
    tol: float = 1e-8
    max_iter: int = 10000


@dataclass(frozen=True)
class FilterSpec:
    """A designed graph filter.

    ``response`` is always populated; for polynomial filters it stores the
    response the coefficients evaluate to on this graph's spectrum.
    """

    kind: str
    response: np.ndarray
    tau: float
    coeffs: np.ndarray | None = None
    basis: str | None = None

    @property
    def order(self) -> int | None:
        return None if self.coeffs is None else len(self.coeffs)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "tau": self.tau, "h_tilde": [float(x) for x in self.response]}
        if self.kind == KIND_POLYNOMIAL:
            out["order"] = self.order
            out["basis"] = self.basis
            out["coeffs"] = [float(x) for x in self.coeffs]
        return out


def filter_to_json(filt: FilterSpec) -> str:
    return json.dumps(filt.to_dict(), indent=2)


def filter_from_json(text: str) -> FilterSpec:
    raw = json.loads(text)
    coeffs = raw.get("coeffs")
    return FilterSpec(
        kind=raw["kind"],
        response=_freeze(np.asarray(raw["h_tilde"], dtype=np.float64)),
        tau=float(raw["tau"]),
        coeffs=None if coeffs is None else _freeze(np.asarray(coeffs, dtype=np.float64)),
        basis=raw.get("basis"),
    )


def all_pass(n: int) -> FilterSpec:
    """The identity filter (unit response everywhere)."""
    return FilterSpec(kind=KIND_FREQUENCY, response=_freeze(np.ones(n)), tau=1.0)


def design_matrix(eigenvalues: np.ndarray, order: int, basis: str) -> np.ndarray:
    """Evaluate the polynomial basis at 1 - eigenvalue, one column per degree."""
    if basis not in BASES:
        raise DomainError(f"unknown basis {basis!r}; expected one of {BASES}")
    x = 1.0 - np.asarray(eigenvalues, dtype=np.float64)
    if basis == "monomial":
        return np.vander(x, order, increasing=True)
    return np.polynomial.chebyshev.chebvander(x, order - 1)


def monomial_coeffs(filt: FilterSpec) -> np.ndarray:
    """Coefficients of a polynomial filter in the monomial basis.

    Needed for vertex-domain application, which iterates powers of the
    normalized adjacency.
    """
    if filt.kind != KIND_POLYNOMIAL:
        raise DomainError("filter has no polynomial coefficients")
    if filt.basis == "monomial":
        return np.asarray(filt.coeffs, dtype=np.float64)
    return np.polynomial.chebyshev.cheb2poly(filt.coeffs)


def _check_tau(tau: float) -> float:
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    return float(tau)


def _validate_design(response: np.ndarray, tau: float, n: int) -> np.ndarray:
    response = check_response(response, n)
    slack = float(np.sum(response)) - n * tau
    if slack < -BUDGET_TOL:
        raise DomainError(f"budget violated: sum(response) - n*tau = {slack:.3e}")
    return _freeze(response)


def design_direct(ctx: BiasContext, cfg: DesignConfig) -> FilterSpec:
    """Global minimizer of the bias metric over the feasible responses.

    The squared metric is sum_i costs_i * response_i^2 with
    costs_i = weights_i^2, so zero-cost frequencies pass at 1 and the rest
    water-fill: response_i = min(1, mu / (2 costs_i)) with mu chosen by
    bisection so the budget constraint binds.
    """
    tau = _check_tau(cfg.tau)
    costs = ctx.weights ** 2
    free = costs == 0.0
    response = np.zeros(ctx.n)
    response[free] = 1.0

    budget = ctx.n * tau - float(np.sum(free))
    if budget > 0.0:
        paying = ~free
        pay_costs = costs[paying]
        count = pay_costs.shape[0]
        if budget >= count - 1e-12:
            response[paying] = 1.0
        else:
            lo, hi = 0.0, 2.0 * float(np.max(pay_costs))

            def mass(mu: float) -> float:
                return float(np.sum(np.minimum(1.0, mu / (2.0 * pay_costs))))

            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mass(mid) < budget:
                    lo = mid
                else:
                    hi = mid
                if abs(mass(hi) - budget) <= cfg.tol and hi - lo <= cfg.tol * max(hi, 1.0):
                    break
            # the upper endpoint always satisfies the budget
            response[paying] = np.minimum(1.0, hi / (2.0 * pay_costs))
    return FilterSpec(kind=KIND_FREQUENCY, response=_validate_design(response, tau, ctx.n),
                      tau=tau)


def design_closed_form(ctx: BiasContext, cfg: DesignConfig) -> FilterSpec:
    """Closed-form minimizer of the upper-bound linear program.

    Walks the bound coefficients in descending order (stable sort, ties by
    ascending index), spending the filtering budget n * (1 - tau) on
    suppressing the worst frequencies first.
    """
    tau = _check_tau(cfg.tau)
    order = np.argsort(-ctx.weights, kind="stable")
    remaining = ctx.n * (1.0 - tau)
    response = np.empty(ctx.n)
    consumed = 0.0
    for idx in order:
        value = max(0.0, 1.0 - max(0.0, remaining - consumed))
        response[idx] = value
        consumed += 1.0 - value
    return FilterSpec(kind=KIND_FREQUENCY, response=_validate_design(response, tau, ctx.n),
                      tau=tau)


def _power_iteration_sigma(mat: np.ndarray, iters: int = 500, tol: float = 1e-12) -> float:
    """Largest singular value of mat, via power iteration on mat^T mat."""
    cols = mat.shape[1]
    vec = np.full(cols, 1.0 / np.sqrt(cols))
    value = 0.0
    for _ in range(iters):
        nxt = mat.T @ (mat @ vec)
        norm = float(np.linalg.norm(nxt))
        if norm == 0.0:
            return 0.0
        nxt /= norm
        if abs(norm - value) <= tol * max(norm, 1.0):
            value = norm
            break
        value = norm
        vec = nxt
    return float(np.sqrt(value))


def project_box_budget(point: np.ndarray, min_total: float) -> np.ndarray:
    """Euclidean projection onto {0 <= g <= 1, sum(g) >= min_total}.

    Clip first; if the clipped mass misses the budget, shift everything up
    by the bisected multiplier that makes the clipped sum meet it (the KKT
    system of the projection has exactly this one-parameter form).
    """
    clipped = np.clip(point, 0.0, 1.0)
    if float(clipped.sum()) >= min_total:
        return clipped
    hi = 1.0
    while float(np.clip(point + hi, 0.0, 1.0).sum()) < min_total:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(np.clip(point + mid, 0.0, 1.0).sum()) < min_total:
            lo = mid
        else:
            hi = mid
    return np.clip(point + hi, 0.0, 1.0)


class _FeasibleProjector:
    """Exact Euclidean projection onto {u : basis @ u feasible}.

    Splits the projection into the response variable (projected onto the
    box-plus-budget set in closed form) and the coefficient variable (a
    cached Cholesky solve), with a scaled dual tying them together. The
    dual state persists between calls, so the near-identical projections
    of consecutive gradient iterates converge in a handful of passes.
    """

    def __init__(self, basis_mat: np.ndarray, min_total: float):
        self.basis = basis_mat
        self.min_total = min_total
        gram = basis_mat.T @ basis_mat
        eigs = np.linalg.eigvalsh(gram)
        lam_max = max(float(eigs[-1]), 1e-30)
        lam_min = max(float(eigs[0]), lam_max * 1e-8)
        self.coupling = 2.0 / np.sqrt(lam_max * lam_min)
        size = basis_mat.shape[1]
        self.chol = np.linalg.cholesky(2.0 * np.eye(size) + self.coupling * gram)
        self.response = None
        self.dual = None

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        half = np.linalg.solve(self.chol, rhs)
        return np.linalg.solve(self.chol.T, half)

    def __call__(self, point: np.ndarray, tol: float = 1e-11, max_iter: int = 2000):
        if self.response is None:
            self.response = project_box_budget(self.basis @ point, self.min_total)
            self.dual = np.zeros_like(self.response)
        u = point
        for _ in range(max_iter):
            rhs = 2.0 * point + self.coupling * (self.basis.T @ (self.response - self.dual))
            u = self._solve(rhs)
            mapped = self.basis @ u
            previous = self.response
            self.response = project_box_budget(mapped + self.dual, self.min_total)
            self.dual = self.dual + mapped - self.response
            primal = float(np.max(np.abs(mapped - self.response)))
            drift = float(np.max(np.abs(self.response - previous)))
            if primal <= tol and drift <= tol:
                break
        return u


def _feasibility_violation(response: np.ndarray, min_total: float) -> float:
    box = max(float(np.max(response - 1.0)), float(np.max(-response)), 0.0)
    budget = max(min_total - float(np.sum(response)), 0.0)
    return max(box, budget)


def design_polynomial(ctx: BiasContext, cfg: DesignConfig) -> FilterSpec:
    """Bias-minimizing polynomial filter of the requested order.

    Accelerated projected gradient descent on the coefficients: Nesterov
    momentum with restart on objective increase and the guaranteed-descent
    step 1 / ||Hessian||_2 (spectral norm estimated by power iteration).
    Projections onto the polynomial-feasible set are exact, via the
    splitting in :class:`_FeasibleProjector`. Terminates on iterate
    movement below cfg.tol, on objective stagnation, or after cfg.max_iter
    steps, then polishes with a final tight projection. Raises
    ConvergenceFailure (carrying the best projected iterate) if the
    returned response is infeasible beyond 1e-6.
    """
    tau = _check_tau(cfg.tau)
    if cfg.order < 1:
        raise DomainError(f"polynomial order must be >= 1, got {cfg.order}")

    basis_mat = design_matrix(ctx.eigenvalues, cfg.order, cfg.basis)
    costs = ctx.weights ** 2
    min_total = ctx.n * tau

    if float(np.max(costs)) == 0.0:
        # objective identically zero: pass everything
        coeffs = np.zeros(cfg.order)
        coeffs[0] = 1.0
        response = basis_mat @ coeffs
        return FilterSpec(kind=KIND_POLYNOMIAL, response=_validate_design(response, tau, ctx.n),
                          tau=tau, coeffs=_freeze(coeffs), basis=cfg.basis)

    # whiten: in the eigenbasis of the Hessian basis^T C basis, scaled by
    # inverse root curvature, the objective is near-isotropic on its range;
    # flat directions get a floored scale and move only through projections
    hessian_half = np.sqrt(costs)[:, None] * basis_mat
    curvature, directions = np.linalg.eigh(hessian_half.T @ hessian_half)
    curvature = np.maximum(curvature, curvature[-1] * 1e-12)
    precond = directions / np.sqrt(curvature)[None, :]
    scaled = basis_mat @ precond

    sigma = _power_iteration_sigma(np.sqrt(costs)[:, None] * scaled)
    step = 1.0 / (2.0 * (1.02 * sigma) ** 2)
    projector = _FeasibleProjector(scaled, min_total)
    proj_tol = min(cfg.tol, 1e-11)

    def objective(point):
        response = scaled @ point
        return float(np.sum(costs * response * response))

    def project(point):
        if _feasibility_violation(scaled @ point, min_total) > 0.0:
            return projector(point, tol=proj_tol)
        return point

    # constant response tau is feasible for every basis (first column is all ones)
    start = np.zeros(cfg.order)
    start[0] = tau
    coeffs = np.sqrt(curvature) * (directions.T @ start)
    best_value = objective(coeffs)
    lookahead = coeffs
    momentum = 1.0
    stagnant = 0
    for _ in range(cfg.max_iter):
        grad = scaled.T @ (2.0 * costs * (scaled @ lookahead))
        candidate = project(lookahead - step * grad)
        value = objective(candidate)
        if value > best_value:
            # restart momentum from the best point seen; repeated restarts
            # without improvement mean the iterate sits at the fixed point
            stagnant += 1
            if stagnant >= 50:
                break
            lookahead = coeffs
            momentum = 1.0
            continue
        momentum_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
        lookahead = candidate + ((momentum - 1.0) / momentum_next) * (candidate - coeffs)
        movement = float(np.linalg.norm(candidate - coeffs))
        stagnant = stagnant + 1 if best_value - value <= 1e-15 * max(best_value, 1e-30) else 0
        coeffs = candidate
        best_value = value
        momentum = momentum_next
        if movement < cfg.tol or stagnant >= 50:
            break

    coeffs = projector(coeffs, tol=1e-13, max_iter=20000)
    coeffs = precond @ coeffs
    response = basis_mat @ coeffs
    violation = _feasibility_violation(response, min_total)
    if violation > BUDGET_TOL:
        raise ConvergenceFailure(
            f"polynomial design infeasible: violation {violation:.3e} > {BUDGET_TOL:.1e}",
            payload=coeffs, violation=violation,
        )
    return FilterSpec(kind=KIND_POLYNOMIAL, response=_validate_design(response, tau, ctx.n),
                      tau=tau, coeffs=_freeze(coeffs), basis=cfg.basis)


@dataclass(frozen=True)
class ObjectiveReport:
    """Bias metric, its upper bound, and the budget slack of a designed filter."""

    rho: float
    bound: float
    budget_slack: float


def objective_report(ctx: BiasContext, filt: FilterSpec) -> ObjectiveReport:
    """Evaluate a filter against the design objectives on its own graph."""
    if filt.response.shape != (ctx.n,):
        raise DimensionMismatch(
            f"filter length {filt.response.shape} != graph size ({ctx.n},)")
    return ObjectiveReport(
        rho=bias_metric(ctx, filt.response),
        bound=bias_metric_upper_bound(ctx, filt.response),
        budget_slack=float(np.sum(filt.response)) - ctx.n * filt.tau,
    )
