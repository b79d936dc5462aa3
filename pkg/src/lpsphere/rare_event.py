"""Monte Carlo for the rare event {m_q of the sphere empirical measure in C}:
probability / rate estimation by exponentially tilted importance sampling,
and a constrained Metropolis chain realizing the conditional law.

The event is scale-invariant in the underlying i.i.d. vector, so the tilted
estimator works on the direction space: the directional density of any
i.i.d. single-power proposal relative to the cone measure is an explicit
gamma-integral ratio, and a tail-spike mixture component (itself closed-form
via incomplete gamma) covers the condensation geometry that small-beta
events force. Weights stay bounded on the event, which keeps the estimator
variance honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc
from scipy.optimize import brentq

from .analytic import is_inf, moment_mu_p, mu_p, require_exponent, thresholds
from .maxent import MaxEntSolution, PowerTerm, Regime, solve_maxent_general, solve_nu_star
from .measures import Interval
from .sampling import RngStream, SpherePoint, as_generator, sample_cone_batch, systematic_resample

__all__ = [
    "RareEventEstimate",
    "ConditionalChainConfig",
    "ConditioningError",
    "SlopeFit",
    "estimate_rare_prob",
    "wls_rate_slope",
    "sample_conditional",
    "conditional_marginals",
    "pbm_marginals",
]

MIN_BUDGET = 10 ** 3
ESS_RELIABLE = 30.0
CHUNK = 50_000


class ConditioningError(RuntimeError):
    """The chain could not be started inside the conditioning event."""


@dataclass(frozen=True)
class RareEventEstimate:
    """log of the estimated event probability with a delta-method standard error.

    ``std_error`` is the standard error of ``log_prob``; ``ess`` is the
    effective number of weighted hits. Estimates with ess below 30 are
    flagged unreliable.
    """

    n: int
    p: float
    q: float
    interval: Interval
    log_prob: float
    std_error: float
    method: str
    n_samples: int
    ess: float
    reliable: bool

    def prob(self) -> float:
        return math.exp(self.log_prob)


def _event_stat(points: np.ndarray, p: float, q: float) -> np.ndarray:
    """m_q of the scaled empirical measure, rows already on the unit p-sphere."""
    n = points.shape[1]
    sq = np.sum(np.abs(points) ** q, axis=1)
    if is_inf(p):
        return sq / n
    return n ** (q / p - 1.0) * sq


def _assemble(logw_hits: np.ndarray, budget: int) -> tuple[float, float, float]:
    """(log_prob, se_of_log, ess) from hit log-weights out of ``budget`` draws."""
    if logw_hits.size == 0:
        return -math.inf, math.inf, 0.0
    m = float(np.max(logw_hits))
    s1 = float(np.sum(np.exp(logw_hits - m)))
    s2 = float(np.sum(np.exp(2.0 * (logw_hits - m))))
    log_p = m + math.log(s1) - math.log(budget)
    # Var(w 1) / budget, relative to P^2, on the log scale
    rel_var = max(s2 * budget / (s1 * s1) - 1.0, 0.0) / budget
    return min(log_p, 0.0), math.sqrt(rel_var), s1 * s1 / s2


def _direct(p, q, n, interval, budget, gen) -> tuple[np.ndarray, int]:
    hits = []
    done = 0
    while done < budget:
        b = min(CHUNK, budget - done)
        done += b
        pts = sample_cone_batch(p, n, b, gen)
        stat = _event_stat(pts, p, q)
        k = int(np.count_nonzero(interval.contains(stat)))
        hits.append(np.zeros(k))
    return np.concatenate(hits), budget


def _spike_threshold(p, q, n, target, mq_star, mp_star) -> float:
    """Spike magnitude S making the event statistic hit ``target`` given a
    typical tilted bulk; the threshold the proposal's tail component uses."""

    def ratio(s):
        mq = ((n - 1) * mq_star + s ** q) / n
        mp = ((n - 1) * mp_star + s ** p) / n
        return mq / mp ** (q / p)

    hi = 10.0 * (n * max(mp_star, 1.0)) ** (1.0 / p)
    lo = 1e-9
    if ratio(hi) > target:  # even a huge spike cannot push the statistic down
        return hi
    return brentq(lambda s: ratio(s) - target, lo, hi, xtol=1e-10)


def _tilted_small_beta(p, q, n, interval, budget, gen, solution: MaxEntSolution):
    """Radially collapsed importance sampler for the small-beta regime.

    Proposal directions: mixture of (a) the direction of i.i.d. draws from
    the scaled q-family (beta = interval.hi) and (b) the same with one
    coordinate replaced by a fat-tail spike, with exact closed-form
    directional densities relative to the cone measure.
    """
    beta = interval.hi
    lam, tau, bs_mult = 0.5, 0.75, 4.0
    bs = bs_mult * beta
    mq_star, mp_star = solution.m_q_value, solution.m_p_value
    t = tau * _spike_threshold(p, q, n, beta, mq_star, mp_star)
    log_ts = math.log(sc.gammaincc(1.0 / q, t ** q / (bs * q)))
    a_n = n / q

    def log_z(qq, b):  # normalizer of the scaled family
        return math.log(2.0) + math.log(b * qq) / qq + float(sc.gammaln(1.0 + 1.0 / qq))

    l_zq, l_zqs = log_z(q, beta), log_z(q, bs)
    l_zp = math.log(2.0) + math.log(p) / p + float(sc.gammaln(1.0 + 1.0 / p))
    log_rad_mup = -n * l_zp + float(sc.gammaln(n / p)) - math.log(p) + (n / p) * math.log(p)
    c_nu = -n * l_zq + float(sc.gammaln(a_n)) - math.log(q)
    c_sp = -(l_zqs - l_zq) - log_ts

    bulk = solution.params.reduce()  # the scaled q-family itself
    hits = []
    done = 0
    while done < budget:
        b = min(CHUNK, budget - done)
        done += b
        y = bulk.sample(gen, (b, n))
        picks = gen.random(b) < lam
        idx = np.where(picks)[0]
        if idx.size:
            j = gen.integers(0, n, size=idx.size)
            u = gen.random(idx.size)
            g = sc.gammainccinv(1.0 / q, u * math.exp(log_ts))
            mag = (bs * q * g) ** (1.0 / q)
            sign = np.where(gen.random(idx.size) < 0.5, -1.0, 1.0)
            y[idx, j] = mag * sign
        r = np.sum(np.abs(y) ** p, axis=1) ** (1.0 / p)
        x = y / r[:, None]
        sq = np.sum(np.abs(x) ** q, axis=1)
        stat = n ** (q / p - 1.0) * sq
        hit = np.asarray(interval.contains(stat))
        if not hit.any():
            continue
        xh = np.abs(x[hit])
        sqh = sq[hit]
        lg_nu = c_nu - a_n * np.log(sqh / (beta * q)) - log_rad_mup
        cj = (sqh[:, None] - xh ** q) / (beta * q) + xh ** q / (bs * q)
        zj = cj * (t / xh) ** q
        qj = sc.gammaincc(a_n, zj)
        with np.errstate(divide="ignore"):
            lg_sp = c_nu + c_sp - a_n * np.log(cj) + np.log(qj) - log_rad_mup
        m = np.maximum(lg_nu, lg_sp.max(axis=1))
        tot = (1.0 - lam) * np.exp(lg_nu - m) + (lam / n) * np.exp(
            lg_sp - m[:, None]
        ).sum(axis=1)
        hits.append(-(m + np.log(tot)))
    return (np.concatenate(hits) if hits else np.empty(0)), budget


def _tilted_iid(p, q, n, interval, budget, gen, tilt):
    """Plain i.i.d. tilt in Y-space with exact per-coordinate likelihood ratio.

    Used where the tilted family already makes the event typical (the
    intermediate regime, whose optimizer has an exactly active p-th moment,
    and lower-binding intervals)."""
    base = mu_p(p)
    hits = []
    done = 0
    while done < budget:
        b = min(CHUNK, budget - done)
        done += b
        y = tilt.sample(gen, (b, n)) if hasattr(tilt, "sample") else tilt(gen, (b, n))
        logw = np.sum(base.log_pdf(y) - tilt.log_pdf(y), axis=1)
        r = np.sum(np.abs(y) ** p, axis=1) ** (1.0 / p)
        stat = _event_stat(y / r[:, None], p, q)
        hit = np.asarray(interval.contains(stat))
        if hit.any():
            hits.append(logw[hit])
    return (np.concatenate(hits) if hits else np.empty(0)), budget


def _lower_binding_tilt(p, q, lo):
    """Exponential-family tilt for events {m_q >= lo}: maxent under
    m_p <= 1 and -m_q <= -lo."""
    sol = solve_maxent_general(
        equalities=[],
        inequalities=[(PowerTerm(p), 1.0), (PowerTerm(q, coef=-1.0), -lo)],
    )
    return sol.params


def estimate_rare_prob(
    p: float,
    q: float,
    n: int,
    interval: Interval,
    method: str = "tilted-is",
    budget: int = 10 ** 5,
    rng: RngStream | np.random.Generator = RngStream(0),
) -> RareEventEstimate:
    """Estimate P(m_q of the sphere empirical measure lies in ``interval``)
    under the cone measure in dimension n.

    ``direct`` counts plain cone draws. ``tilted-is`` draws from an
    exponentially tilted proposal adapted to the binding side of the
    interval, weights each sample by the exact likelihood ratio, and
    averages the weighted indicator; the estimator is unbiased for every
    regime and its weights are bounded on the event in the small-beta
    (condensation) regime.
    """
    p = require_exponent(p)
    q = require_exponent(q)
    if not q < p:
        raise ValueError("need q < p")
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET}")
    gen = as_generator(rng)
    canonical = {"direct": "Direct", "tilted-is": "TiltedIS"}.get(str(method).lower())
    if canonical is None:
        raise ValueError(f"unknown method {method!r}; use 'direct' or 'tilted-is'")

    base = dict(n=n, p=p, q=q, interval=interval, method=canonical, n_samples=budget)
    # sure and impossible events short-circuit exactly
    if interval.lo <= 0.0 and math.isinf(interval.hi):
        return RareEventEstimate(
            log_prob=0.0, std_error=0.0, ess=float(budget), reliable=True, **base
        )
    if not is_inf(p) and interval.lo > 1.0:
        # the statistic never exceeds one on the sphere (power-mean inequality)
        return RareEventEstimate(
            log_prob=-math.inf, std_error=0.0, ess=float(budget), reliable=True, **base
        )

    if canonical == "Direct":
        logw, total = _direct(p, q, n, interval, budget, gen)
    else:
        if is_inf(p):
            raise ValueError("the tilted estimator needs finite p; use method='direct'")
        typical = moment_mu_p(p, q)
        if interval.contains(typical):
            logw, total = _direct(p, q, n, interval, budget, gen)
        elif interval.hi < typical:
            solution = solve_nu_star(p, q, interval.hi)
            if solution.regime is Regime.SMALL_BETA:
                logw, total = _tilted_small_beta(p, q, n, interval, budget, gen, solution)
            else:
                logw, total = _tilted_iid(p, q, n, interval, budget, gen, solution.params)
        else:
            tilt = _lower_binding_tilt(p, q, interval.lo)
            logw, total = _tilted_iid(p, q, n, interval, budget, gen, tilt)

    log_prob, se, ess = _assemble(logw, total)
    return RareEventEstimate(
        log_prob=log_prob,
        std_error=se,
        ess=ess,
        reliable=bool(ess >= ESS_RELIABLE),
        **base,
    )


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_se: float


def wls_rate_slope(estimates: list[RareEventEstimate]) -> SlopeFit:
    """Weighted least squares of -log P on n; weights are inverse variances.

    The intercept absorbs the subexponential prefactor; the slope estimates
    the large-deviations rate.
    """
    usable = [e for e in estimates if math.isfinite(e.log_prob)]
    if len(usable) < 2:
        raise ValueError("need at least two finite estimates to fit a slope")
    ns = np.array([e.n for e in usable], dtype=float)
    ys = np.array([-e.log_prob for e in usable])
    ws = np.array([1.0 / max(e.std_error, 1e-6) ** 2 for e in usable])
    x = np.vstack([np.ones_like(ns), ns]).T
    xtw = x.T * ws
    cov = np.linalg.inv(xtw @ x)
    coef = cov @ (xtw @ ys)
    return SlopeFit(slope=float(coef[1]), intercept=float(coef[0]), slope_se=float(math.sqrt(cov[1, 1])))


# -- conditional sampling ------------------------------------------------------

@dataclass(frozen=True)
class ConditionalChainConfig:
    """Settings for the event-restricted random-walk chain.

    burn_in and thin are measured in full sweeps (n single-coordinate
    updates each). proposal_scale is the initial per-coordinate step
    standard deviation; it is tuned toward ~35% acceptance during burn-in
    and frozen afterwards. ``n`` and ``target_interval`` may echo the call
    arguments; when set they must agree.
    """

    burn_in: int = 2000
    thin: int = 5
    proposal_scale: float | None = None
    n: int | None = None
    target_interval: Interval | None = None
    init_attempts: int = 10 ** 4

    def __post_init__(self):
        if self.burn_in < 0 or self.thin < 1:
            raise ValueError("need burn_in >= 0 and thin >= 1")
        if self.proposal_scale is not None and self.proposal_scale <= 0.0:
            raise ValueError("proposal_scale must be positive")


_SWEEP = None


def _sweep_kernel():
    """Lazily compiled single-coordinate Metropolis sweep (finite p)."""
    global _SWEEP
    if _SWEEP is None:
        from numba import njit

        @njit(cache=True, fastmath=False)
        def sweep(y, sp, sq, scale, z, logu, picks, lo, hi, p, q, npow):
            acc = 0
            for k in range(picks.shape[0]):
                i = picks[k]
                yi = y[i]
                yn = yi + scale * z[k]
                dp = abs(yn) ** p - abs(yi) ** p
                if logu[k] < -dp / p:
                    dq = abs(yn) ** q - abs(yi) ** q
                    spn = sp + dp
                    sqn = sq + dq
                    m = npow * sqn / spn ** (q / p)
                    if lo <= m <= hi:
                        y[i] = yn
                        sp = spn
                        sq = sqn
                        acc += 1
            return sp, sq, acc

        _SWEEP = sweep
    return _SWEEP


def _stat_of_y(y: np.ndarray, p: float, q: float) -> float:
    n = y.size
    sq = float(np.sum(np.abs(y) ** q))
    if is_inf(p):
        return sq / (n * float(np.max(np.abs(y))) ** q)
    sp = float(np.sum(np.abs(y) ** p))
    return n ** (q / p - 1.0) * sq / sp ** (q / p)


def _initial_point(p, q, n, interval, gen, attempts) -> np.ndarray:
    """A feasible chain start: i.i.d. draws from the event-adapted tilt, then
    a deterministic spike / flattening repair when the tilt alone cannot
    reach the event (the small-beta regime leaves p-th moment slack that a
    single large coordinate must carry)."""
    if is_inf(p):
        tilt = mu_p(p)
        typical = 1.0 / (q + 1.0)
    else:
        typical = moment_mu_p(p, q)
        if interval.contains(typical):
            tilt = mu_p(p)
        elif interval.hi < typical:
            tilt = solve_nu_star(p, q, interval.hi).params
        else:
            tilt = _lower_binding_tilt(p, q, interval.lo)
    y0 = None
    for _ in range(max(1, min(attempts, 256))):
        y = tilt.sample(gen, n)
        if interval.contains(_stat_of_y(y, p, q)):
            return y
        y0 = y
    # spike repair: grow one coordinate to push the statistic down into C
    if _stat_of_y(y0, p, q) > interval.hi:
        target = interval.lo + 0.98 * (interval.hi - interval.lo)
        spike0 = float(np.abs(y0[-1]))

        def stat_with_spike(s):
            y0[-1] = s
            return _stat_of_y(y0, p, q)

        s_hi = max(10.0, spike0)
        for _ in range(200):
            if stat_with_spike(s_hi) <= target:
                break
            s_hi *= 1.5
        else:
            raise ConditioningError(
                "could not reach the conditioning event; widen the interval (larger epsilon)"
            )
        s = brentq(lambda v: stat_with_spike(v) - target, spike0 + 1e-12, s_hi, xtol=1e-10)
        y0[-1] = s
        if interval.contains(_stat_of_y(y0, p, q)):
            return y0
    else:
        # flatten toward equal magnitudes to raise the statistic into C
        target = interval.lo + 0.02 * (interval.hi - interval.lo) if math.isfinite(
            interval.hi
        ) else interval.lo * 1.02
        mean_mag = float(np.mean(np.abs(y0)))
        signs = np.sign(y0)
        base = y0.copy()

        def stat_flat(c):
            yc = (1.0 - c) * base + c * signs * mean_mag
            return _stat_of_y(yc, p, q)

        if stat_flat(1.0) >= target:
            c = brentq(lambda v: stat_flat(v) - target, 0.0, 1.0, xtol=1e-12)
            yc = (1.0 - c) * base + c * signs * mean_mag
            if interval.contains(_stat_of_y(yc, p, q)):
                return yc
    raise ConditioningError(
        "could not reach the conditioning event; widen the interval (larger epsilon)"
    )


def _chain_engine(p, q, n, interval, config, rng):
    """Yields (y, sp) after burn-in, one item per ``thin`` sweeps."""
    p = require_exponent(p)
    q = require_exponent(q)
    if not q < p:
        raise ValueError("need q < p")
    if is_inf(p):
        raise NotImplementedError("the restricted chain is implemented for finite p")
    if config.n is not None and config.n != n:
        raise ValueError("config.n disagrees with the call argument")
    if config.target_interval is not None and config.target_interval != interval:
        raise ValueError("config.target_interval disagrees with the call argument")
    if not interval.hi > interval.lo:
        raise ValueError("the conditioning interval needs nonempty interior")
    gen = as_generator(rng)
    sweep = _sweep_kernel()
    y = np.ascontiguousarray(_initial_point(p, q, n, interval, gen, config.init_attempts))
    sp = float(np.sum(np.abs(y) ** p))
    sq = float(np.sum(np.abs(y) ** q))
    npow = n ** (q / p - 1.0)
    if config.proposal_scale is not None:
        scale = config.proposal_scale
    else:
        scale = 2.4 * math.sqrt(moment_mu_p(p, 2.0))  # burn-in adaptation refines this
    # burn-in with block-wise scale adaptation, frozen afterwards
    blocks = 20
    per_block = max(config.burn_in // blocks, 1) if config.burn_in else 0
    for _ in range(blocks if config.burn_in else 0):
        m = per_block * n
        picks = gen.integers(0, n, size=m)
        z = gen.standard_normal(m)
        logu = np.log(gen.random(m))
        sp, sq, acc = sweep(y, sp, sq, scale, z, logu, picks, interval.lo, interval.hi, p, q, npow)
        rate = acc / m
        scale = float(np.clip(scale * math.exp((rate - 0.35) * 0.5), 1e-4, 1e4))
    while True:
        m = config.thin * n
        picks = gen.integers(0, n, size=m)
        z = gen.standard_normal(m)
        logu = np.log(gen.random(m))
        sp, sq, acc = sweep(y, sp, sq, scale, z, logu, picks, interval.lo, interval.hi, p, q, npow)
        yield y, sp, acc / m


def sample_conditional(p, q, n, interval: Interval, config: ConditionalChainConfig, rng):
    """Stream of sphere points whose law targets the cone measure conditioned
    on the event; every emitted point satisfies the event exactly."""
    for y, sp, _ in _chain_engine(p, q, n, interval, config, rng):
        coords = y / sp ** (1.0 / p)
        yield SpherePoint(coords=coords.copy(), p=p, weight=1.0)


def conditional_marginals(
    p, q, n, interval: Interval, config: ConditionalChainConfig, rng, keep: int, coord_indices
):
    """(keep, len(coord_indices)) array of scaled coordinates n^{1/p} X_i from
    the restricted chain, plus the mean acceptance rate."""
    idx = np.asarray(coord_indices, dtype=int)
    out = np.empty((keep, idx.size))
    rates = 0.0
    engine = _chain_engine(p, q, n, interval, config, rng)
    scale = n ** (1.0 / p)
    for k in range(keep):
        y, sp, rate = next(engine)
        out[k] = scale * y[idx] / sp ** (1.0 / p)
        rates += rate
    return out, rates / keep


def pbm_marginals(p, n, k, draws, measure="cone", rng=RngStream(0)) -> np.ndarray:
    """(draws, k) array of the scaled leading coordinates n^{1/p} X_{1..k}."""
    p = require_exponent(p)
    if k > n:
        raise ValueError("k must not exceed the dimension")
    if draws < 1:
        raise ValueError("need at least one draw")
    gen = as_generator(rng)
    pts = sample_cone_batch(p, n, draws, gen)
    if measure == "surface":
        from .sampling import _surface_log_weights

        logw = _surface_log_weights(pts, p)
        w = np.exp(logw - logw.max())
        pts = pts[systematic_resample(w, gen)]
    elif measure != "cone":
        raise ValueError(f"unknown measure {measure!r}")
    scale = 1.0 if is_inf(p) else n ** (1.0 / p)
    return scale * pts[:, :k]
