"""Closed-form overlay curves evaluated from manifest parameters.

These are the only formulas the frontend knows; they take exactly the
fields a run manifest embeds (p, q, beta, kappa0, kappa_p, kappa_q) and
never call back into the compute package.
"""

import math

import numpy as np


def gen_gaussian_density(x, p: float) -> np.ndarray:
    """Density (2 p^{1/p} Gamma(1+1/p))^{-1} exp(-|x|^p / p); uniform on
    [-1, 1] when p is infinite."""
    x = np.asarray(x, dtype=float)
    if math.isinf(p):
        return np.where(np.abs(x) <= 1.0, 0.5, 0.0)
    z = 2.0 * p ** (1.0 / p) * math.gamma(1.0 + 1.0 / p)
    return np.exp(-np.abs(x) ** p / p) / z


def scaled_family_density(x, q: float, beta: float) -> np.ndarray:
    """Density (2 (beta q)^{1/q} Gamma(1+1/q))^{-1} exp(-|x|^q / (beta q))."""
    x = np.asarray(x, dtype=float)
    z = 2.0 * (beta * q) ** (1.0 / q) * math.gamma(1.0 + 1.0 / q)
    return np.exp(-np.abs(x) ** q / (beta * q)) / z


def exp_family_density(x, kappa0: float, kappa_p: float, kappa_q: float, p: float, q: float):
    """Density exp(-1 - kappa0 - kappa_p |x|^p - kappa_q |x|^q)."""
    ax = np.abs(np.asarray(x, dtype=float))
    return np.exp(-1.0 - kappa0 - kappa_p * ax ** p - kappa_q * ax ** q)


def solution_density(x, analytic: dict) -> np.ndarray:
    """Overlay for a solved maximizer, straight from its manifest block."""
    return exp_family_density(
        x,
        analytic["kappa0"],
        analytic["kappa_p"],
        analytic["kappa_q"],
        _exponent(analytic["p"]),
        _exponent(analytic["q"]),
    )


def _exponent(v) -> float:
    return math.inf if v == "inf" else float(v)
