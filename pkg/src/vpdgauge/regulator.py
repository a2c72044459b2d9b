"""Lorentz-invariant light-cone cutoff integrals.

``omega(n)`` is the dimensionless regulated cone integral

    Omega_n = 1 / ((2 pi)^3 4^(n+2)) * int_0^1 x^n (sqrt(1-x) - x ln((1 + sqrt(1-x)) / sqrt(x))) dx

and ``omega_oracle`` estimates the same number from its four-dimensional
definition (momentum measure ``d^4P / (2 pi)^4``, mass shells ``0 <= M^2 <=
1/(4 scale^2)``, energy cutoff ``|P_0| <= 1/(2 scale)`` on both cones) by
Monte Carlo.  The cutoff frame is the rest frame ``L = (1/scale, 0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

FORWARD, BACKWARD, OUTSIDE = "forward", "backward", "outside"


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegulatorParams:
    scale: float = 1.0
    tolerance: float = 1e-12
    mc_samples: int = 10**7
    seed: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")


def cone_membership(P) -> str:
    """Classify a 4-vector (lower index) with ``eta = diag(-1, 1, 1, 1)``.

    ``P = 0`` is reported as forward.
    """
    P = np.asarray(P, dtype=float)
    msq = P[0] ** 2 - float(P[1:] @ P[1:])
    if msq < 0:
        return OUTSIDE
    return FORWARD if P[0] >= 0 else BACKWARD


def _integrand_t(t: float, n: int) -> float:
    # x = 1 - t^2 removes the square-root branch point at x = 1
    x = 1.0 - t * t
    if x <= 0.0:
        return 0.0
    return 2.0 * t * x**n * (t - x * math.log((1.0 + t) / math.sqrt(x)))


def omega_integral(n: int, tolerance: float = 1e-12) -> tuple[float, float]:
    """The bare 1-D integral and its error estimate."""
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    value, err = quad(_integrand_t, 0.0, 1.0, args=(int(n),), epsabs=0.0,
                      epsrel=tolerance, limit=200)
    if err > max(tolerance * abs(value), 1e-15):
        raise QuadratureError(f"quadrature did not converge: estimate {value}, error {err}")
    return value, err


def omega(n: int, tolerance: float = 1e-12) -> float:
    """Regulated cone integral ``Omega_n`` (independent of the scale)."""
    value, _ = omega_integral(n, tolerance)
    return value / ((2 * math.pi) ** 3 * 4 ** (n + 2))


def omega_oracle(n: int, samples: int, seed: int = 0, scale: float = 1.0,
                 chunk: int = 1 << 20) -> tuple[float, float]:
    """Monte Carlo estimate of ``Omega_n`` and its standard error.

    Samples ``(M^2, P_vec, sign)`` uniformly in ``[0, c^2] x [-c, c]^3 x {+, -}``
    with ``c = 1/(2 scale)``, sets ``P_0 = sign * sqrt(M^2 + |P|^2)`` and
    weights by the delta-function Jacobian ``1/(2 |P_0|)``.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    c = 0.5 / scale
    volume = c * c * (2 * c) ** 3 * 2
    prefactor = scale ** (2 * n + 4) * volume / (2 * math.pi) ** 4
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        msq = rng.uniform(0.0, c * c, m)
        p = rng.uniform(-c, c, (m, 3))
        sign = np.where(rng.integers(0, 2, m) == 1, 1.0, -1.0)
        energy = np.sqrt(msq + np.einsum("ij,ij->i", p, p))
        p0 = sign * energy
        # -L^2 +- 2 L.P with L = (1/scale, 0) in the rest frame
        inside = np.where(p0 >= 0, scale**-2 - 2 * p0 / scale >= 0,
                          scale**-2 + 2 * p0 / scale >= 0)
        w = np.where(inside, msq**n / (2.0 * np.maximum(energy, 1e-300)), 0.0)
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return prefactor * mean, prefactor * math.sqrt(var / samples)
