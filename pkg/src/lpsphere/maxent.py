"""Constrained maximum-entropy solves over two-power exponential families.

The optimizer of  max h(nu)  under moment constraints on |x|^r power
functions is an exponential family exp(-1 - k0 - sum_r kappa_r |x|^r) with
nonnegative multipliers on inequality constraints and complementary
slackness. The solver minimizes the convex dual

    D(theta) = log Z(theta) + sum_k theta_k b_k

by damped Newton steps projected onto the nonnegativity constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .analytic import (
    ExpFamily,
    ScaledGeneralizedGaussian,
    log_norm_mu_p,
    moment_mu_p,
    moment_mu_q_beta,
    rate_offset,
    require_finite_exponent,
    thresholds,
)

__all__ = [
    "Regime",
    "MaxEntSolution",
    "GeneralMaxEntSolution",
    "PowerTerm",
    "MaxEntInfeasibleError",
    "MaxEntUnboundedError",
    "solve_nu_star",
    "solve_maxent_general",
]

QUAD_KW = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
DUAL_GRAD_TOL = 1e-11
SLACK_TOL = 1e-8
MAX_ITER = 200


class MaxEntInfeasibleError(RuntimeError):
    """The constraint set admits no probability measure (dual unbounded below)."""


class MaxEntUnboundedError(RuntimeError):
    """Entropy is unbounded over the constraint set (no normalizable maximizer)."""


class Regime(Enum):
    SMALL_BETA = "SmallBeta"
    LARGE_BETA = "LargeBeta"
    INTERMEDIATE = "Intermediate"


@dataclass(frozen=True)
class PowerTerm:
    """A constraint integrand coef * |x|^power (coef -1 encodes lower bounds)."""

    power: float
    coef: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.power) and self.power > 0.0):
            raise ValueError("constraint powers must be finite and positive")
        if self.coef == 0.0:
            raise ValueError("constraint coefficient must be nonzero")


def _as_term(fn) -> PowerTerm:
    if isinstance(fn, PowerTerm):
        return fn
    return PowerTerm(power=float(fn))


# -- quadrature over exponents ------------------------------------------------

def _cutoff(kappas: dict[float, float], extra_power: float) -> float:
    c = 1.0
    for _ in range(600):
        g = sum(k * c ** r for r, k in kappas.items())
        if g - extra_power * math.log(max(c, 1.0)) >= 46.0:
            return c
        c *= 1.2
    raise MaxEntInfeasibleError("candidate density is not normalizable")


def _log_half_integral(kappas: dict[float, float], r: float) -> float:
    """log int_0^inf x^r exp(-sum kappa_s x^s) dx, overflow-safe.

    The integrand peak is factored out so the quadrature sees values of
    order one even when a coefficient is badly negative mid-solve."""
    cut = _cutoff(kappas, r)

    def log_f(x):
        if x <= 0.0:
            return -math.inf if r > 0.0 else -sum(
                k * x ** s for s, k in kappas.items()
            )
        return r * math.log(x) - sum(k * x ** s for s, k in kappas.items())

    grid = np.linspace(cut * 1e-9, cut, 512)
    vals = [log_f(float(x)) for x in grid]
    arg = int(np.argmax(vals))
    # the grid can straddle a needle-sharp peak; refine before shifting
    from scipy.optimize import minimize_scalar

    lo_b = float(grid[max(arg - 1, 0)])
    hi_b = float(grid[min(arg + 1, grid.size - 1)])
    res = minimize_scalar(lambda x: -log_f(x), bounds=(lo_b, hi_b), method="bounded")
    x_peak = float(res.x)
    peak = max(vals[arg], log_f(x_peak))

    def f(x):
        return math.exp(min(log_f(x) - peak, 700.0))

    val, _ = quad(f, 0.0, cut, points=[x_peak], **QUAD_KW)
    if val <= 0.0:
        raise MaxEntInfeasibleError("normalization integral degenerated to zero")
    return peak + math.log(val)


def _half_integral(kappas: dict[float, float], r: float) -> float:
    return math.exp(_log_half_integral(kappas, r))


def _normalizable(kappas: dict[float, float]) -> bool:
    live = {r: k for r, k in kappas.items() if k != 0.0}
    if not live:
        return False
    return live[max(live)] > 0.0


# -- solution containers -------------------------------------------------------

@dataclass(frozen=True)
class MaxEntSolution:
    """Solution of the two-moment problem: family parameters plus certificates."""

    params: ExpFamily
    regime: Regime
    beta: float
    m_p_value: float
    m_q_value: float
    rate: float

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def q(self) -> float:
        return self.params.q

    def slackness_residuals(self) -> tuple[float, float]:
        return (
            abs(self.params.kappa_p * (self.m_p_value - 1.0)),
            abs(self.params.kappa_q * (self.m_q_value - self.beta)),
        )

    def validate(self, tol: float = SLACK_TOL) -> None:
        rp, rq = self.slackness_residuals()
        if max(rp, rq) > tol:
            raise RuntimeError(f"complementary slackness violated: {rp:.2e}, {rq:.2e}")
        if self.m_p_value > 1.0 + tol or self.m_q_value > self.beta + tol:
            raise RuntimeError("moment constraints violated beyond tolerance")

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "beta": self.beta,
            "regime": self.regime.value,
            "kappa0": self.params.kappa0,
            "kappa_p": self.params.kappa_p,
            "kappa_q": self.params.kappa_q,
            "m_p": self.m_p_value,
            "m_q": self.m_q_value,
            "rate": self.rate,
        }


@dataclass(frozen=True)
class GeneralMaxEntSolution:
    params: ExpFamily
    multipliers: np.ndarray
    n_equalities: int
    constraint_values: np.ndarray
    dual_grad_norm: float

    def slackness_residuals(self, bounds: np.ndarray) -> np.ndarray:
        mu = self.multipliers[self.n_equalities :]
        vals = self.constraint_values[self.n_equalities :]
        return np.abs(mu * (vals - bounds[self.n_equalities :]))


# -- the dual Newton solver ----------------------------------------------------

def _dual_solve(terms, bounds, n_eq, theta0, presolve=False):
    """Minimize D(theta) = log Z + theta . b, multipliers of inequalities >= 0.

    Optionally runs a bounded quasi-Newton pass first (robust against the
    singular Hessians that collinear two-sided constraints produce), then
    polishes with projected damped Newton to push the dual gradient below
    the certification tolerance."""
    terms = list(terms)
    bounds = np.asarray(bounds, dtype=float)
    k = len(terms)
    theta = np.asarray(theta0, dtype=float).copy()
    ineq = np.arange(k) >= n_eq

    def kappas_of(th):
        kap: dict[float, float] = {}
        for t, v in zip(terms, th):
            kap[t.power] = kap.get(t.power, 0.0) + t.coef * v
        return kap

    def project(th):
        out = th.copy()
        out[ineq] = np.maximum(out[ineq], 0.0)
        return out

    theta = project(theta)
    if not _normalizable(kappas_of(theta)):
        for bump in (1e-2, 1e-1, 1.0):
            cand = theta.copy()
            cand[ineq] = np.maximum(cand[ineq], bump)
            if _normalizable(kappas_of(cand)):
                theta = cand
                break
        else:
            raise MaxEntUnboundedError(
                "no multiplier assignment yields a normalizable density; "
                "entropy is unbounded over this constraint set"
            )

    def stats(th):
        kap = kappas_of(th)
        log_z0 = _log_half_integral(kap, 0.0)
        powers = sorted({t.power for t in terms} | {a.power + b.power for a in terms for b in terms})
        m = {}
        for r in powers:
            log_m = _log_half_integral(kap, r) - log_z0
            if log_m > 700.0:
                raise MaxEntInfeasibleError("moments diverged; constraints infeasible")
            m[r] = math.exp(log_m)
        vals = np.array([t.coef * m[t.power] for t in terms])
        grad = bounds - vals
        hess = np.empty((k, k))
        for i, a in enumerate(terms):
            for j, b in enumerate(terms):
                hess[i, j] = a.coef * b.coef * (
                    m[a.power + b.power] - m[a.power] * m[b.power]
                )
        logz = math.log(2.0) + log_z0
        return logz + float(th @ bounds), grad, hess, vals

    if presolve:
        from scipy.optimize import minimize

        def objective(th):
            if not _normalizable(kappas_of(th)):
                return 1e12, np.zeros(k)
            try:
                val, grad, _, _ = stats(th)
            except MaxEntInfeasibleError:
                return 1e12, np.zeros(k)
            return val, grad

        res = minimize(
            objective,
            theta,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None) if ineq[i] else (None, None) for i in range(k)],
            options=dict(maxiter=500, ftol=1e-16, gtol=1e-12),
        )
        cand = project(np.asarray(res.x))
        if _normalizable(kappas_of(cand)):
            theta = cand

    d_val, grad, hess, vals = stats(theta)
    for _ in range(MAX_ITER):
        res = grad.copy()
        at_zero = ineq & (theta <= 0.0)
        res[at_zero] = np.minimum(res[at_zero], 0.0)
        if np.linalg.norm(res) < DUAL_GRAD_TOL:
            return theta, vals, float(np.linalg.norm(res)), kappas_of(theta)
        # two-sided constraints on the same power make the Hessian singular;
        # escalate the ridge until the step is a finite descent direction
        ridge = 1e-12 * max(float(np.trace(hess)), 1.0)
        step = -grad
        for _ in range(8):
            try:
                cand_step = -np.linalg.solve(hess + ridge * np.eye(k), grad)
            except np.linalg.LinAlgError:
                ridge *= 100.0
                continue
            if np.all(np.isfinite(cand_step)) and float(grad @ cand_step) < 0.0:
                step = cand_step
                break
            ridge *= 100.0
        t = 1.0
        for _ in range(60):
            cand = project(theta + t * step)
            if _normalizable(kappas_of(cand)):
                c_val, c_grad, c_hess, c_vals = stats(cand)
                if c_val <= d_val + 1e-14 * abs(d_val) or np.linalg.norm(c_grad) < np.linalg.norm(grad):
                    theta, d_val, grad, hess, vals = cand, c_val, c_grad, c_hess, c_vals
                    break
            t *= 0.5
        else:
            raise MaxEntInfeasibleError(
                "dual line search stalled; the constraint set is likely infeasible"
            )
        if np.linalg.norm(theta) > 1e8:
            raise MaxEntInfeasibleError(
                "dual multipliers diverged; the constraint set is infeasible"
            )
    raise MaxEntInfeasibleError("dual Newton did not converge; constraints likely infeasible")


def _exp_family_from_kappas(kappas: dict[float, float]) -> ExpFamily:
    live = sorted((r for r, k in kappas.items() if k != 0.0), reverse=True)
    if len(live) > 2:
        raise ValueError("the artifact only represents families with at most two powers")
    if len(live) == 0:
        raise MaxEntUnboundedError("empty exponent: no normalizable density")
    p_pow = live[0]
    q_pow = live[1] if len(live) == 2 else live[0]
    kp = kappas[p_pow]
    kq = kappas[q_pow] if len(live) == 2 else 0.0
    trial = {r: k for r, k in kappas.items() if k != 0.0}
    z = 2.0 * _half_integral(trial, 0.0)
    return ExpFamily(math.log(z) - 1.0, kp, kq, p_pow, q_pow)


def solve_maxent_general(equalities, inequalities) -> GeneralMaxEntSolution:
    """Maximize entropy under power-moment constraints.

    ``equalities``: iterable of (term, alpha) with int coef*|x|^power dnu = alpha.
    ``inequalities``: iterable of (term, beta) with int coef*|x|^power dnu <= beta.
    A term may be given as a bare power (coef 1); encode a lower bound
    m_r >= a as (PowerTerm(r, coef=-1.0), -a).

    Raises :class:`MaxEntUnboundedError` when no normalizable maximizer exists
    and :class:`MaxEntInfeasibleError` when the constraints are contradictory.
    """
    eqs = [( _as_term(f), float(b)) for f, b in equalities]
    ineqs = [(_as_term(f), float(b)) for f, b in inequalities]
    if not eqs and not ineqs:
        raise MaxEntUnboundedError("entropy on the line is unbounded without constraints")
    terms = [t for t, _ in eqs] + [t for t, _ in ineqs]
    bounds = np.array([b for _, b in eqs] + [b for _, b in ineqs])
    candidates = {t.power for t, _ in eqs} | {t.power for t, _ in ineqs if t.coef > 0.0}
    if not candidates:
        raise MaxEntUnboundedError(
            "no constraint can supply tail decay; entropy is unbounded"
        )
    theta0 = np.full(len(terms), 0.1)
    theta, vals, grad_norm, kappas = _dual_solve(terms, bounds, len(eqs), theta0, presolve=True)
    params = _exp_family_from_kappas(kappas)
    sol = GeneralMaxEntSolution(
        params=params,
        multipliers=theta,
        n_equalities=len(eqs),
        constraint_values=vals,
        dual_grad_norm=grad_norm,
    )
    slack = sol.slackness_residuals(bounds)
    if slack.size and slack.max() > SLACK_TOL:
        raise MaxEntInfeasibleError(f"complementary slackness failed: {slack.max():.2e}")
    for (t, b), v in zip(eqs, vals[: len(eqs)]):
        if abs(v - b) > SLACK_TOL:
            raise MaxEntInfeasibleError(f"equality constraint missed: {v} != {b}")
    for (t, b), v in zip(ineqs, vals[len(eqs) :]):
        if v > b + SLACK_TOL:
            raise MaxEntInfeasibleError(f"inequality constraint violated: {v} > {b}")
    return sol


def _small_beta_solution(p, q, beta, th) -> MaxEntSolution:
    kq = 1.0 / (beta * q)
    kappa0 = log_norm_mu_p(q) + math.log(beta) / q - 1.0
    params = ExpFamily(kappa0, 0.0, kq, p, q)
    rate = rate_offset(p) - ScaledGeneralizedGaussian(q, beta).entropy()
    return MaxEntSolution(
        params=params,
        regime=Regime.SMALL_BETA,
        beta=beta,
        m_p_value=moment_mu_q_beta(p, q, beta),
        m_q_value=beta,
        rate=rate,
    )


def _large_beta_solution(p, q, beta) -> MaxEntSolution:
    params = ExpFamily(log_norm_mu_p(p) - 1.0, 1.0 / p, 0.0, p, q)
    return MaxEntSolution(
        params=params,
        regime=Regime.LARGE_BETA,
        beta=beta,
        m_p_value=1.0,
        m_q_value=moment_mu_p(p, q),
        rate=0.0,
    )


def solve_nu_star(p: float, q: float, beta: float) -> MaxEntSolution:
    """Maximizer of entropy under m_p <= 1 and m_q <= beta (interval [0, beta]).

    Small beta gives the scaled q-family exactly (kappa_q = 1/(beta q)), large
    beta the exponent-p base measure; in between both multipliers are strictly
    positive and found by the dual Newton solve on the two active moment
    equations. The reported rate is the moment-penalized relative entropy of
    the solution.
    """
    p = require_finite_exponent(p)
    q = require_finite_exponent(q)
    if not q < p:
        raise ValueError(f"need q < p, got q={q}, p={p}")
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    th = thresholds(p, q)
    if beta <= th.beta_small:
        return _small_beta_solution(p, q, beta, th)
    if beta >= th.beta_large:
        return _large_beta_solution(p, q, beta)
    # intermediate: both constraints active; warm start between the regimes
    s = (beta - th.beta_small) / (th.beta_large - th.beta_small)
    theta0 = np.array([max(s / p, 1e-3), max((1.0 - s) / (beta * q), 1e-3)])
    terms = [PowerTerm(p), PowerTerm(q)]
    bounds = np.array([1.0, beta])
    theta, vals, grad_norm, kappas = _dual_solve(terms, bounds, 0, theta0)
    # treat both as inequalities: multipliers must come out positive here
    kp, kq = float(theta[0]), float(theta[1])
    if kp <= 0.0 or kq <= 0.0:
        raise RuntimeError(
            "intermediate regime produced a boundary multiplier; "
            f"kappa_p={kp}, kappa_q={kq}"
        )
    params = _exp_family_from_kappas(kappas)
    m_p_value, m_q_value = float(vals[0]), float(vals[1])
    # rate via the entropy identity; h = 1 + k0 + kp m_p + kq m_q
    h = 1.0 + params.kappa0 + params.kappa_p * m_p_value + params.kappa_q * m_q_value
    rate = rate_offset(p) - h
    sol = MaxEntSolution(
        params=params,
        regime=Regime.INTERMEDIATE,
        beta=beta,
        m_p_value=m_p_value,
        m_q_value=m_q_value,
        rate=rate,
    )
    sol.validate()
    return sol
