"""Closed-form densities, constants, moments and entropies on the line.

Everything downstream (samplers, rate functions, max-entropy solves,
rare-event tilts) consumes the families defined here:

* ``GeneralizedGaussian(p)``   density  (2 p^{1/p} Gamma(1+1/p))^{-1} e^{-|y|^p/p}
* ``ScaledGeneralizedGaussian(q, beta)``  density  (2 (beta q)^{1/q} Gamma(1+1/q))^{-1} e^{-|x|^q/(beta q)}
* ``ExpFamily(kappa0, kappa_p, kappa_q, p, q)``  density  exp(-1 - kappa0 - kappa_p|x|^p - kappa_q|x|^q)
* ``UniformSymmetric(halfwidth)``  the p = infinity base case

The exponent ``p`` is a plain float in [1, inf]; ``math.inf`` is the
distinguished infinite case everywhere, never a large finite stand-in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc
from scipy.integrate import quad

__all__ = [
    "require_exponent",
    "require_finite_exponent",
    "is_inf",
    "log_norm_mu_p",
    "rate_offset",
    "moment_mu_p",
    "moment_mu_q_beta",
    "thresholds",
    "RegimeThresholds",
    "cdf_mu_p",
    "quantile_mu_p",
    "entropy_closed_form",
    "Density",
    "GeneralizedGaussian",
    "ScaledGeneralizedGaussian",
    "UniformSymmetric",
    "ExpFamily",
    "Mixture",
    "mu_p",
    "mu_q_beta",
]

QUAD_KW = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
NORMALIZATION_TOL = 1e-10


# -- exponent handling -------------------------------------------------------

def is_inf(p: float) -> bool:
    return math.isinf(p)


def require_exponent(p: float) -> float:
    """Validate p in [1, inf]; returns p as float (inf allowed)."""
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1 (or inf), got {p}")
    return p


def require_finite_exponent(p: float) -> float:
    p = require_exponent(p)
    if is_inf(p):
        raise ValueError("exponent must be finite here; the p = inf case is handled separately")
    return p


# -- constants ---------------------------------------------------------------

def log_norm_mu_p(p: float) -> float:
    """log Z_p with Z_p = 2 p^{1/p} Gamma(1 + 1/p); log 2 at p = inf."""
    p = require_exponent(p)
    if is_inf(p):
        return math.log(2.0)
    return math.log(2.0) + math.log(p) / p + sc.gammaln(1.0 + 1.0 / p)


def rate_offset(p: float) -> float:
    """The constant c_p = log(2 p^{1/p} Gamma(1+1/p)) + 1/p (1/inf = 0).

    Equals the differential entropy of the generalized Gaussian with
    exponent p, so the rate of any admissible density nu is c_p - h(nu).
    """
    p = require_exponent(p)
    if is_inf(p):
        return math.log(2.0)
    return log_norm_mu_p(p) + 1.0 / p


# -- closed-form moments and thresholds --------------------------------------

def moment_mu_p(p: float, q: float) -> float:
    """q-th absolute moment of the generalized Gaussian with exponent p.

    m_q = p^{q/p} Gamma((q+1)/p) / Gamma(1/p), finite p only; for the
    p = inf (uniform) case use halfwidth^q/(q+1) directly.
    """
    p = require_finite_exponent(p)
    q = float(q)
    if not (q >= 0.0 and math.isfinite(q)):
        raise ValueError(f"moment order must be finite and nonnegative, got {q}")
    return math.exp(
        (q / p) * math.log(p) + sc.gammaln((q + 1.0) / p) - sc.gammaln(1.0 / p)
    )


def moment_mu_q_beta(p: float, q: float, beta: float) -> float:
    """p-th absolute moment of the scaled family: beta^{p/q} q^{p/q} Gamma((p+1)/q)/Gamma(1/q)."""
    q = require_finite_exponent(q)
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    return beta ** (p / q) * moment_mu_p(q, p)


@dataclass(frozen=True)
class RegimeThresholds:
    """Regime boundaries in beta for the conditioned q-th moment.

    beta_small: below it the optimizer is the scaled q-family itself.
    beta_large: the unconditioned q-th moment; above it conditioning is idle.
    """

    beta_small: float
    beta_large: float


def thresholds(p: float, q: float) -> RegimeThresholds:
    """beta_small = (1/q)(Gamma(1/q)/Gamma((p+1)/q))^{q/p}, beta_large = m_q of the p-family."""
    p = require_exponent(p)
    q = require_finite_exponent(q)
    if is_inf(p):
        raise ValueError("no finite small-beta threshold exists for p = inf")
    if not q < p:
        raise ValueError(f"thresholds require q < p, got q={q}, p={p}")
    beta_small = (1.0 / q) * math.exp(
        (q / p) * (sc.gammaln(1.0 / q) - sc.gammaln((p + 1.0) / q))
    )
    return RegimeThresholds(beta_small=beta_small, beta_large=moment_mu_p(p, q))


# -- CDF / quantile of the generalized Gaussian ------------------------------

def cdf_mu_p(p: float, y):
    """CDF of the exponent-p generalized Gaussian (uniform on [-1,1] at p=inf).

    F(y) = 1/2 + sign(y) P(1/p, |y|^p/p) / 2 with P the regularized lower
    incomplete gamma function.
    """
    p = require_exponent(p)
    y = np.asarray(y, dtype=float)
    if is_inf(p):
        out = np.clip((y + 1.0) / 2.0, 0.0, 1.0)
    else:
        out = 0.5 + np.sign(y) * 0.5 * sc.gammainc(1.0 / p, np.abs(y) ** p / p)
    return out if out.ndim else float(out)


def quantile_mu_p(p: float, u):
    """Inverse CDF; u in (0,1)."""
    p = require_exponent(p)
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    if is_inf(p):
        out = 2.0 * u - 1.0
    else:
        tail = np.abs(2.0 * u - 1.0)
        mag = (p * sc.gammaincinv(1.0 / p, tail)) ** (1.0 / p)
        out = np.sign(u - 0.5) * mag
    return out if out.ndim else float(out)


# -- density families ---------------------------------------------------------

def _sample_abs_gg(p: float, rng: np.random.Generator, size) -> np.ndarray:
    # |Y| = (p G)^{1/p}, G ~ Gamma(1/p, 1); Marsaglia-Tsang under the hood
    g = rng.gamma(1.0 / p, 1.0, size=size)
    return (p * g) ** (1.0 / p)


def _rademacher(rng: np.random.Generator, size) -> np.ndarray:
    return np.where(rng.random(size=size) < 0.5, -1.0, 1.0)


class Density:
    """Common quadrature plumbing for the symmetric families on the line.

    Subclasses provide ``log_pdf`` on [0, inf) support conventions and a
    ``_power_terms()`` list of (coef, power) pairs describing the decay of
    -log pdf, which drives the integration cutoff.
    """

    def log_pdf(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def support_halfwidth(self) -> float:
        return math.inf

    def _power_terms(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def _cutoff(self, extra_power: float = 0.0) -> float:
        """Upper integration limit: every tail integrand below ~1e-20."""
        half = self.support_halfwidth()
        if math.isfinite(half):
            return half
        terms = self._power_terms()
        c = 1.0
        for _ in range(400):
            g = sum(k * c ** r for k, r in terms)
            if g - extra_power * math.log(max(c, 1.0)) >= 46.0:
                return c
            c *= 1.25
        raise RuntimeError("could not locate an integration cutoff; density decays too slowly")

    def _breakpoints(self):
        """Interior discontinuity locations for the quadrature (support edges)."""
        return []

    def _integrate(self, f, extra_power: float = 0.0) -> float:
        """2 * int_0^cutoff f(x) dx for an even integrand given on [0, inf)."""
        hi = self._cutoff(extra_power)
        pts = [b for b in self._breakpoints() if 0.0 < b < hi]
        val, _ = quad(f, 0.0, hi, points=pts or None, **QUAD_KW)
        return 2.0 * val

    def normalization_defect(self) -> float:
        return abs(self._integrate(lambda x: self.pdf(x)) - 1.0)

    def moment(self, q: float) -> float:
        """q-th absolute moment; +inf when the integral diverges; q=inf gives the support halfwidth."""
        q = float(q)
        if math.isinf(q):
            return self.support_halfwidth()
        return self._integrate(lambda x: x ** q * self.pdf(x), extra_power=q)

    def cdf(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        for i, yi in enumerate(y):
            a = abs(yi)
            half, _ = quad(lambda x: self.pdf(x), 0.0, min(a, self._cutoff()), **QUAD_KW)
            out[i] = 0.5 + math.copysign(half, yi)
        return out if out.shape != (1,) else float(out[0])

    def quantile(self, u):
        from scipy.optimize import brentq

        u = np.atleast_1d(np.asarray(u, dtype=float))
        hi = self._cutoff()
        out = np.array([brentq(lambda y: self.cdf(y) - ui, -hi, hi, xtol=1e-13) for ui in u])
        return out if out.shape != (1,) else float(out[0])

    def entropy_quadrature(self) -> float:
        """Differential entropy -int f log f by quadrature."""

        def integrand(x):
            f = self.pdf(x)
            return 0.0 if f <= 0.0 else -f * self.log_pdf(x)

        return self._integrate(integrand, extra_power=1.0)

    def sample(self, rng: np.random.Generator, size):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class GeneralizedGaussian(Density):
    """The exponent-p generalized Gaussian with scale p^{1/p} (density e^{-|y|^p/p}/Z_p)."""

    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", require_finite_exponent(self.p))

    def log_pdf(self, x):
        return -np.abs(np.asarray(x, dtype=float)) ** self.p / self.p - log_norm_mu_p(self.p)

    def _power_terms(self):
        return [(1.0 / self.p, self.p)]

    def moment(self, q: float) -> float:
        if math.isinf(q):
            return math.inf
        return moment_mu_p(self.p, q)

    def cdf(self, y):
        return cdf_mu_p(self.p, y)

    def quantile(self, u):
        return quantile_mu_p(self.p, u)

    def entropy(self) -> float:
        return rate_offset(self.p)

    def sample(self, rng: np.random.Generator, size):
        return _sample_abs_gg(self.p, rng, size) * _rademacher(rng, size)


@dataclass(frozen=True)
class ScaledGeneralizedGaussian(Density):
    """mu_{q,beta}: the exponent-q family scaled by beta^{1/q} (density e^{-|x|^q/(beta q)}/Z)."""

    q: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "q", require_finite_exponent(self.q))
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")

    @property
    def scale(self) -> float:
        return self.beta ** (1.0 / self.q)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return (
            -np.abs(x) ** self.q / (self.beta * self.q)
            - math.log(self.scale)
            - log_norm_mu_p(self.q)
        )

    def _power_terms(self):
        return [(1.0 / (self.beta * self.q), self.q)]

    def moment(self, r: float) -> float:
        if math.isinf(r):
            return math.inf
        return moment_mu_q_beta(r, self.q, self.beta)

    def cdf(self, y):
        return cdf_mu_p(self.q, np.asarray(y, dtype=float) / self.scale)

    def quantile(self, u):
        return np.asarray(quantile_mu_p(self.q, u)) * self.scale

    def entropy(self) -> float:
        # log(2 (beta q)^{1/q} Gamma(1+1/q)) + 1/q
        return math.log(self.scale) + rate_offset(self.q)

    def sample(self, rng: np.random.Generator, size):
        return self.scale * _sample_abs_gg(self.q, rng, size) * _rademacher(rng, size)


@dataclass(frozen=True)
class UniformSymmetric(Density):
    """Uniform on [-halfwidth, halfwidth]; halfwidth 1 is the p = inf base measure."""

    halfwidth: float = 1.0

    def __post_init__(self):
        if self.halfwidth <= 0.0:
            raise ValueError("halfwidth must be positive")

    def support_halfwidth(self) -> float:
        return self.halfwidth

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.halfwidth
        with np.errstate(divide="ignore"):
            out = np.where(inside, -math.log(2.0 * self.halfwidth), -np.inf)
        return out if out.ndim else float(out)

    def _power_terms(self):
        return []

    def moment(self, q: float) -> float:
        if math.isinf(q):
            return self.halfwidth
        return self.halfwidth ** q / (q + 1.0)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.clip((y + self.halfwidth) / (2.0 * self.halfwidth), 0.0, 1.0)
        return out if out.ndim else float(out)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = (2.0 * u - 1.0) * self.halfwidth
        return out if out.ndim else float(out)

    def entropy(self) -> float:
        return math.log(2.0 * self.halfwidth)

    def sample(self, rng: np.random.Generator, size):
        return rng.uniform(-self.halfwidth, self.halfwidth, size=size)


@dataclass(frozen=True)
class ExpFamily(Density):
    """Two-power exponential family exp(-1 - kappa0 - kappa_p|x|^p - kappa_q|x|^q).

    kappa0 is the log-partition offset; use :meth:`normalized` to solve for
    it. kappa_q may be negative (lower-bound moment constraints) provided
    kappa_p > 0 with p > q so the density stays normalizable.
    """

    kappa0: float
    kappa_p: float
    kappa_q: float
    p: float
    q: float

    def __post_init__(self):
        require_finite_exponent(self.p)
        require_finite_exponent(self.q)
        if self.kappa_p < 0.0:
            raise ValueError("kappa_p must be nonnegative")
        if self.kappa_p == 0.0 and self.kappa_q <= 0.0:
            raise ValueError("need a positive decay coefficient for normalizability")
        if self.kappa_q < 0.0 and not (self.kappa_p > 0.0 and self.p > self.q):
            raise ValueError("negative kappa_q requires a dominating kappa_p term")

    @staticmethod
    def normalized(kappa_p: float, kappa_q: float, p: float, q: float) -> "ExpFamily":
        """Solve the log-partition offset so the density integrates to one."""
        trial = ExpFamily(-1.0, kappa_p, kappa_q, p, q)
        z = trial._integrate(lambda x: np.exp(-kappa_p * x ** p - kappa_q * x ** q))
        return ExpFamily(math.log(z) - 1.0, kappa_p, kappa_q, p, q)

    def log_pdf(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return -1.0 - self.kappa0 - self.kappa_p * x ** self.p - self.kappa_q * x ** self.q

    def _power_terms(self):
        terms = []
        if self.kappa_p > 0.0:
            terms.append((self.kappa_p, self.p))
        if self.kappa_q > 0.0:
            terms.append((self.kappa_q, self.q))
        if self.kappa_q < 0.0:
            # dominated by the p-term; keep a conservative half of it
            terms = [(self.kappa_p / 2.0, self.p)]
        return terms

    def reduce(self):
        """Collapse to a single-power family when one coefficient vanishes."""
        if self.kappa_q == 0.0 and self.kappa_p > 0.0:
            return ScaledGeneralizedGaussian(self.p, 1.0 / (self.p * self.kappa_p))
        if self.kappa_p == 0.0 and self.kappa_q > 0.0:
            return ScaledGeneralizedGaussian(self.q, 1.0 / (self.q * self.kappa_q))
        return None

    def entropy_semianalytic(self) -> float:
        """h = 1 + kappa0 + kappa_p m_p + kappa_q m_q (moments by quadrature)."""
        h = 1.0 + self.kappa0
        if self.kappa_p != 0.0:
            h += self.kappa_p * self.moment(self.p)
        if self.kappa_q != 0.0:
            h += self.kappa_q * self.moment(self.q)
        return h

    def sample(self, rng: np.random.Generator, size):
        reduced = self.reduce()
        if reduced is not None:
            return reduced.sample(rng, size)
        shape = tuple(size) if isinstance(size, (tuple, list)) else (int(size),)
        size = int(np.prod(shape))
        if self.kappa_q > 0.0:
            # envelope: pure p-term, accept with exp(-kappa_q |x|^q) <= 1
            env_kp, log_m = self.kappa_p, 0.0
        else:
            # envelope: half the p-decay; bound the residual convex gap
            env_kp = self.kappa_p / 2.0
            xs = ((-self.kappa_q * self.q) / (env_kp * self.p)) ** (1.0 / (self.p - self.q))
            log_m = -env_kp * xs ** self.p - self.kappa_q * xs ** self.q
        proposal = ScaledGeneralizedGaussian(self.p, 1.0 / (self.p * env_kp))
        out = np.empty(size)
        filled = 0
        while filled < size:
            m = max(size - filled, 64)
            x = proposal.sample(rng, 2 * m)
            ax = np.abs(x)
            log_acc = (
                -(self.kappa_p - env_kp) * ax ** self.p - self.kappa_q * ax ** self.q - log_m
            )
            keep = x[np.log(rng.random(2 * m)) < log_acc]
            take = min(keep.size, size - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
        return out.reshape(shape)


@dataclass(frozen=True)
class Mixture(Density):
    """Finite mixture of the symmetric families; used by convexity probes."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.min() < 0.0 or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to one")

    def support_halfwidth(self) -> float:
        return max(c.support_halfwidth() for c in self.components)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components))

    def log_pdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def _power_terms(self):
        # slowest-decaying component dominates the tail
        terms = [c._power_terms() for c in self.components if c._power_terms()]
        if not terms:
            return []
        return min(terms, key=lambda t: (min(r for _, r in t)))

    def _breakpoints(self):
        # bounded-support components put jumps inside the mixture density
        return sorted(
            {c.support_halfwidth() for c in self.components if math.isfinite(c.support_halfwidth())}
        )

    def moment(self, q: float) -> float:
        if math.isinf(q):
            return self.support_halfwidth()
        return float(sum(w * c.moment(q) for w, c in zip(self.weights, self.components)))

    def sample(self, rng: np.random.Generator, size):
        size = int(size)
        counts = rng.multinomial(size, self.weights)
        parts = [c.sample(rng, k) for c, k in zip(self.components, counts) if k]
        out = np.concatenate(parts) if parts else np.empty(0)
        rng.shuffle(out)
        return out


def mu_p(p: float) -> Density:
    """The base measure for exponent p: generalized Gaussian, or uniform at p = inf."""
    p = require_exponent(p)
    return UniformSymmetric(1.0) if is_inf(p) else GeneralizedGaussian(p)


def mu_q_beta(q: float, beta: float) -> ScaledGeneralizedGaussian:
    return ScaledGeneralizedGaussian(q, beta)


def entropy_closed_form(d: Density) -> float:
    """Closed-form differential entropy for the single-power and uniform families.

    Two-power exponential family members have no closed form here; their
    entropy goes through quadrature (see entropy_rate).
    """
    if isinstance(d, (GeneralizedGaussian, ScaledGeneralizedGaussian, UniformSymmetric)):
        return d.entropy()
    if isinstance(d, ExpFamily):
        reduced = d.reduce()
        if reduced is not None:
            return reduced.entropy()
        raise ValueError(
            "no closed-form entropy for a genuine two-power exponential family; "
            "use quadrature"
        )
    raise ValueError(f"no closed-form entropy for {type(d).__name__}")
