"""Gauge fields, field strengths, covariant derivatives and gauge variations.

A gauge field is an array ``A[mu, alpha, *grid, M]`` (spacetime index lower,
inner index upper); a field strength is the full antisymmetric array
``F[mu, nu, alpha, *grid, M]``.  Spacetime derivatives are spectral along
the grid axes; along axes the grid does not carry they vanish.
"""
from __future__ import annotations

import itertools

import numpy as np

from .inner_space import (
    ETA,
    ConstraintError,
    Domain,
    advect,
    divergence_residual,
    lie_bracket,
    reality_residual,
)

PAIRS = [(m, n) for m in range(4) for n in range(m + 1, 4)]
TRIPLES = list(itertools.combinations(range(4), 3))


def _norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(x) ** 2)))


def check_admissible(dom: Domain, A: np.ndarray, tol: float = 1e-10, name: str = "A") -> None:
    """Raise ConstraintError unless every slice is divergence-free and real."""
    lat = dom.lattice
    for mu in range(A.shape[0]):
        r = divergence_residual(lat, A[mu])
        if r > tol:
            raise ConstraintError(f"{name}[{mu}] violates the divergence constraint ({r:.2e})")
    r = reality_residual(lat, A)
    if r > tol:
        raise ConstraintError(f"{name} violates the reality condition ({r:.2e})")


def field_strength(dom: Domain, A: np.ndarray, check: bool = False) -> np.ndarray:
    """``F_mn = d_m A_n - d_n A_m + [A_m, A_n]``."""
    if check:
        check_admissible(dom, A)
    lat, grid = dom.lattice, dom.grid
    dA = np.stack([grid.derivative(A, mu) for mu in range(4)])  # dA[m, n] = d_m A_n
    F = np.zeros((4,) + A.shape, dtype=complex)
    for m, n in PAIRS:
        F[m, n] = dA[m, n] - dA[n, m] + lie_bracket(lat, A[m], A[n])
        F[n, m] = -F[m, n]
    return F


def gauge_variation_A(dom: Domain, A: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """``delta A_mu = d_mu eps + A_mu . nabla eps - eps . nabla A_mu``."""
    lat, grid = dom.lattice, dom.grid
    out = np.empty_like(A, dtype=complex)
    for mu in range(4):
        out[mu] = grid.derivative(eps, mu) + lie_bracket(lat, A[mu], eps)
    return out


def gauge_variation_F(dom: Domain, F: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """``delta F_mn = -[eps, F_mn]``."""
    lat = dom.lattice
    out = np.zeros_like(F, dtype=complex)
    for m, n in PAIRS:
        out[m, n] = lie_bracket(lat, F[m, n], eps)
        out[n, m] = -out[m, n]
    return out


def gauge_variation_matter(dom: Domain, psi: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """``delta psi = -eps . nabla psi``."""
    return -advect(dom.lattice, eps, psi)


def covariant_derivative(dom: Domain, A: np.ndarray, G: np.ndarray, mu: int) -> np.ndarray:
    """Lower-index covariant derivative on inner vectors, ``d_mu G + [A_mu, G]``."""
    return dom.grid.derivative(G, mu) + lie_bracket(dom.lattice, A[mu], G)


def covariant_derivative_vector(dom: Domain, A: np.ndarray, G: np.ndarray, mu: int) -> np.ndarray:
    """``(D^mu G)^alpha = d^mu G^alpha + A^{mu beta} nabla_beta G^alpha - G^beta nabla_beta A^{mu alpha}``."""
    return ETA[mu, mu] * covariant_derivative(dom, A, G, mu)


def bianchi_residual(dom: Domain, A: np.ndarray, F: np.ndarray | None = None) -> float:
    """Relative norm of the cyclic sum ``D_r F_mn + D_m F_nr + D_n F_rm``.

    Normalized by the summed norms of the nine terms entering each cyclic
    sum, so the value measures cancellation.
    """
    if F is None:
        F = field_strength(dom, A)
    total, scale = 0.0, 0.0
    for r, m, n in TRIPLES:
        terms = [
            covariant_derivative(dom, A, F[m, n], r),
            covariant_derivative(dom, A, F[n, r], m),
            covariant_derivative(dom, A, F[r, m], n),
        ]
        total += _norm(sum(terms)) ** 2
        scale += sum(_norm(t) for t in terms) ** 2
    if scale == 0:
        return 0.0
    return float(np.sqrt(total / scale))


def rescale(dom: Domain, A: np.ndarray, scale: float, rho: float) -> tuple[np.ndarray, float, Domain]:
    """Inner rescaling ``X -> rho X``: amplitudes and scale grow by ``rho``.

    On the lattice the integer labels are kept and the base frequency
    becomes ``kappa0 / rho``.
    """
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    return rho * A, rho * scale, dom.rescaled(rho)
