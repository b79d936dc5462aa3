"""Exact samplers: i.i.d. generalized Gaussians, the cone measure, and the
surface measure via density-ratio reweighting.

All randomness flows through counter-based Philox streams keyed by
(seed, stream_id): identical keys reproduce identical output bitwise, and
distinct stream ids are statistically independent, so workers simply take
different stream ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .analytic import is_inf, mu_p, require_exponent, require_finite_exponent

__all__ = [
    "RngStream",
    "SpherePoint",
    "SurfaceWeightStats",
    "as_generator",
    "sample_gen_gaussian",
    "sample_cone",
    "sample_cone_batch",
    "sample_surface",
    "systematic_resample",
]

NORM_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """A reproducible, independent random stream keyed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2 ** 64):
                raise ValueError(f"{name} must fit in 64 unsigned bits")

    def generator(self) -> Generator:
        return Generator(Philox(SeedSequence(entropy=(int(self.seed), int(self.stream_id)))))

    def child(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + int(offset))


def as_generator(rng) -> Generator:
    """Accept a stream (fresh generator per call) or a live Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, Generator):
        return rng
    raise TypeError("rng must be an RngStream or a numpy Generator")


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit l^p sphere with an (importance) weight."""

    coords: np.ndarray
    p: float
    weight: float = 1.0

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        coords.setflags(write=False)
        if self.weight <= 0.0:
            raise ValueError("weight must be positive")

    @property
    def n(self) -> int:
        return self.coords.size

    def norm_defect(self) -> float:
        if is_inf(self.p):
            return abs(float(np.max(np.abs(self.coords))) - 1.0)
        return abs(float(np.sum(np.abs(self.coords) ** self.p)) ** (1.0 / self.p) - 1.0)

    def validate(self) -> None:
        if self.norm_defect() > NORM_TOL:
            raise ValueError(f"coordinates leave the unit sphere by {self.norm_defect():.3e}")


@dataclass(frozen=True)
class SurfaceWeightStats:
    """Range of the raw surface log-weights over a batch, with its a.s. bound."""

    log_weight_min: float
    log_weight_max: float
    n: int
    p: float

    def span(self) -> float:
        return self.log_weight_max - self.log_weight_min

    def span_bound(self) -> float:
        # 2 |1/2 - 1/p| log n
        return 2.0 * abs(0.5 - 1.0 / self.p) * math.log(self.n)

    def validate(self) -> None:
        if self.span() > self.span_bound() + 1e-9:
            raise ValueError(
                f"log-weight span {self.span():.6f} exceeds bound {self.span_bound():.6f}"
            )


def sample_gen_gaussian(p: float, n: int, rng) -> np.ndarray:
    """n i.i.d. draws from the exponent-p base measure.

    Finite p: Y = sign * (p G)^{1/p} with G ~ Gamma(1/p); p = inf: uniform
    on [-1, 1].
    """
    p = require_exponent(p)
    if n < 1:
        raise ValueError("need at least one draw")
    return mu_p(p).sample(as_generator(rng), n)


def sample_cone_batch(p: float, n: int, size: int, rng) -> np.ndarray:
    """(size, n) array of cone-measure draws: rows are Y/||Y||_p."""
    p = require_exponent(p)
    gen = as_generator(rng)
    out = np.empty((size, n))
    row = 0
    while row < size:
        m = size - row
        y = mu_p(p).sample(gen, (m, n))
        if is_inf(p):
            norms = np.max(np.abs(y), axis=1)
        else:
            norms = np.sum(np.abs(y) ** p, axis=1) ** (1.0 / p)
        good = norms > 0.0  # all-zero rows have probability zero; resample defensively
        k = int(good.sum())
        out[row : row + k] = y[good] / norms[good, None]
        row += k
    return out


def sample_cone(p: float, n: int, rng) -> SpherePoint:
    """One draw from the cone measure on the unit l^p sphere."""
    coords = sample_cone_batch(p, n, 1, rng)[0]
    return SpherePoint(coords=coords, p=p, weight=1.0)


def _surface_log_weights(points: np.ndarray, p: float) -> np.ndarray:
    # dsigma/dgamma ~ (sum |x_i|^{2p-2})^{1/2}, normalizing constant dropped
    return 0.5 * np.log(np.sum(np.abs(points) ** (2.0 * p - 2.0), axis=1))


def systematic_resample(weights: np.ndarray, rng) -> np.ndarray:
    """Indices of a systematic resample proportional to the given weights."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    n = w.size
    u = (np.arange(n) + as_generator(rng).random()) / n
    return np.searchsorted(np.cumsum(w), u, side="left").clip(0, n - 1)


def sample_surface(
    p: float, n: int, batch: int, rng, resample: bool = False
) -> tuple[list[SpherePoint], SurfaceWeightStats]:
    """Surface-measure batch by self-normalized reweighting of cone draws.

    Returns weighted SpherePoints (weights normalized to mean one), or, with
    ``resample=True``, an unweighted batch obtained by systematic resampling.
    The p = inf sphere has sigma = gamma; use sample_cone directly there.
    """
    p = require_finite_exponent(p)
    if batch < 1:
        raise ValueError("batch must be positive")
    gen = as_generator(rng)
    pts = sample_cone_batch(p, n, batch, gen)
    logw = _surface_log_weights(pts, p)
    stats = SurfaceWeightStats(
        log_weight_min=float(np.min(logw)),
        log_weight_max=float(np.max(logw)),
        n=n,
        p=p,
    )
    w = np.exp(logw - np.max(logw))
    w *= batch / w.sum()
    if resample:
        idx = systematic_resample(w, gen)
        points = [SpherePoint(coords=pts[i], p=p, weight=1.0) for i in idx]
    else:
        points = [SpherePoint(coords=x, p=p, weight=float(wi)) for x, wi in zip(pts, w)]
    return points, stats
