"""Action-level observables: Lagrangian, field equations, currents, stress tensors.

Inner-space integrals are Parseval sums, ``int d^4X f g = V sum_K conj(f_K) g_K``
for real ``f, g`` on an inner box of volume ``V``.  Inner indices are
contracted with ``eta``.  The inner length ``scale`` enters with the
printed powers: ``scale^-4`` in the inner measure, ``1/(4 scale^2)`` in the
Lagrangian density and ``scale^-6`` in the stress tensor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauge_kinematics import PAIRS, covariant_derivative_vector, field_strength
from .inner_space import ETA, Domain, advect, lie_bracket, pointwise_product, spectral_derivative
from .regulator import omega

_SIG = np.diag(ETA)


def inner_pairing(dom: Domain, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``int d^4X f^alpha g_alpha`` pointwise in x for (4, *grid, M) fields."""
    s = np.einsum("a,a...m,a...m->...", _SIG, np.conj(f), g)
    return dom.inner_volume * s


def _ff(dom: Domain, F: np.ndarray) -> np.ndarray:
    """``int d^4X F_mn^alpha F^mn_alpha`` over x."""
    out = np.zeros(dom.grid.shape, dtype=complex)
    for m, n in PAIRS:
        out += 2 * _SIG[m] * _SIG[n] * inner_pairing(dom, F[m, n], F[m, n])
    return out


def lagrangian_density(dom: Domain, F: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """``-(1/4 scale^2) int d^4X scale^-4 F.F`` as a real field over x."""
    return np.real(-_ff(dom, F) / (4 * scale**2) * scale**-4)


def trace_functional(dom: Domain, F: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Regulated trace ``Tr_scale{F F} = (Omega_1 / 4) int d^4X scale^-6 F.F`` over x."""
    return np.real(omega(1) / 4 * _ff(dom, F) * scale**-6)


def lagrangian_from_trace(dom: Domain, F: np.ndarray, scale: float = 1.0) -> np.ndarray:
    return -trace_functional(dom, F, scale) / omega(1)


def action(dom: Domain, A: np.ndarray, scale: float = 1.0) -> float:
    return float(dom.integrate(lagrangian_density(dom, field_strength(dom, A), scale)))


def _relative(residual: np.ndarray, terms) -> float:
    scale = sum(float(np.sqrt(np.sum(np.abs(t) ** 2))) for t in terms)
    if scale == 0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(residual) ** 2)) / scale)


def field_eq_residual(dom: Domain, A: np.ndarray, F: np.ndarray | None = None
                      ) -> tuple[np.ndarray, float]:
    """``R_nu = d^mu F_mn + A^mu . nabla F_mn - F_mn . nabla A^mu`` and its relative norm."""
    lat, grid = dom.lattice, dom.grid
    if F is None:
        F = field_strength(dom, A)
    R = np.zeros_like(A, dtype=complex)
    terms = []
    for nu in range(4):
        for mu in range(4):
            if mu == nu:
                continue
            parts = (
                _SIG[mu] * grid.derivative(F[mu, nu], mu),
                _SIG[mu] * advect(lat, A[mu], F[mu, nu]),
                -_SIG[mu] * advect(lat, F[mu, nu], A[mu]),
            )
            R[nu] += sum(parts)
            terms.extend(parts)
    return R, _relative(R, terms)


def field_eq_covariant(dom: Domain, A: np.ndarray, F: np.ndarray | None = None) -> np.ndarray:
    """The same residual as ``sum_mu D^mu F_mu nu`` via the covariant derivative."""
    if F is None:
        F = field_strength(dom, A)
    return np.stack([
        sum(covariant_derivative_vector(dom, A, F[mu, nu], mu) for mu in range(4))
        for nu in range(4)
    ])


def self_current(dom: Domain, A: np.ndarray, F: np.ndarray | None = None) -> np.ndarray:
    """``J_nu = A^mu . nabla F_mn - F_mn . nabla A^mu``."""
    if F is None:
        F = field_strength(dom, A)
    J = np.zeros_like(A, dtype=complex)
    for nu in range(4):
        for mu in range(4):
            if mu != nu:
                J[nu] += _SIG[mu] * lie_bracket(dom.lattice, A[mu], F[mu, nu])
    return J


@dataclass
class StressTensor:
    """``theta[mu, nu]`` is the improved tensor ``Theta^mu_nu(x)``.

    ``canonical`` is ``T^mu_nu`` when the gauge field was supplied, and
    ``imag_residue`` the largest imaginary part discarded from theta.
    """

    theta: np.ndarray
    canonical: np.ndarray | None
    imag_residue: float


def _mixed(dom: Domain, F: np.ndarray, G: np.ndarray, mu: int, nu: int) -> np.ndarray:
    """``sum_rho int F^{mu rho}_alpha G_{nu rho}^alpha``."""
    out = np.zeros(dom.grid.shape, dtype=complex)
    for rho in range(4):
        out += _SIG[mu] * _SIG[rho] * inner_pairing(dom, F[mu, rho], G[nu, rho])
    return out


def stress_tensor(dom: Domain, F: np.ndarray, scale: float = 1.0,
                  A: np.ndarray | None = None) -> StressTensor:
    """Improved (and optionally canonical) energy-momentum tensor."""
    ff = _ff(dom, F)
    theta = np.zeros((4, 4, *dom.grid.shape), dtype=complex)
    for mu in range(4):
        for nu in range(4):
            theta[mu, nu] = (0.25 * ff * (mu == nu) - _mixed(dom, F, F, mu, nu)) * scale**-6
    canonical = None
    if A is not None:
        # dA[nu, rho] = d_nu A_rho
        dA = np.stack([dom.grid.derivative(A, nu) for nu in range(4)])
        canonical = np.zeros_like(theta)
        for mu in range(4):
            for nu in range(4):
                canonical[mu, nu] = (0.25 * ff * (mu == nu) - _mixed(dom, F, dA, mu, nu)) * scale**-6
        canonical = np.real(canonical)
    scale_theta = float(np.max(np.abs(theta))) or 1.0
    residue = float(np.max(np.abs(theta.imag))) / scale_theta
    return StressTensor(np.real(theta), canonical, residue)


def improvement_residual(dom: Domain, A: np.ndarray, scale: float = 1.0,
                         F: np.ndarray | None = None) -> float:
    """Relative norm of ``Theta - T - d_rho int F^{mu rho}_alpha A_nu^alpha scale^-6``.

    Vanishes on-shell when the inner pairing is invariant under the
    bracket (e.g. the Abelian sector); needs a grid that carries axis 0.
    """
    if F is None:
        F = field_strength(dom, A)
    st = stress_tensor(dom, F, scale, A)
    div = np.zeros_like(st.theta)
    for mu in range(4):
        for nu in range(4):
            for rho in range(4):
                fa = _SIG[mu] * _SIG[rho] * inner_pairing(dom, F[mu, rho], A[nu]) * scale**-6
                div[mu, nu] += np.real(dom.grid.derivative(fa[..., None], rho)[..., 0])
    resid = st.theta - st.canonical - div
    return _relative(resid, [st.theta, st.canonical, div])


def four_momentum(dom: Domain, theta: np.ndarray) -> np.ndarray:
    """``p_mu = int d^3x Theta^0_mu``."""
    return np.array([float(dom.integrate(theta[0, mu])) for mu in range(4)])


# free scalar probe ---------------------------------------------------------

def matter_probe_current(dom: Domain, psi: np.ndarray, psi_dot: np.ndarray, scale: float = 1.0
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Noether currents ``J^nu_alpha(x)`` and charges ``P_alpha`` of the free scalar.

    The probe Lagrangian is ``-1/2 d_mu psi d^mu psi``; its conjugate
    momentum ``psi_dot`` makes ``P_alpha = int pi nabla_alpha psi`` the
    generator of ``+nabla_alpha`` shifts.
    """
    lat, grid = dom.lattice, dom.grid
    w = dom.inner_volume * scale**-4
    upper = [-psi_dot] + [grid.derivative(psi, j) for j in (1, 2, 3)]  # d^nu psi
    J = np.zeros((4, 4, *grid.shape))
    for nu in range(4):
        for alpha in range(4):
            na = spectral_derivative(lat, psi, alpha)
            J[nu, alpha] = -np.real(w * np.sum(np.conj(upper[nu]) * na, axis=-1))
    charges = np.array([float(dom.integrate(J[0, a])) for a in range(4)])
    return J, charges


def matter_lagrangian(dom: Domain, psi: np.ndarray, psi_dot: np.ndarray) -> np.ndarray:
    """Coefficients of ``L_M(x, X) = 1/2 psi_dot^2 - 1/2 |grad psi|^2``."""
    lat, grid = dom.lattice, dom.grid
    out = 0.5 * pointwise_product(lat, psi_dot, psi_dot)
    for j in grid.axes:
        if j != 0:
            d = grid.derivative(psi, j)
            out = out - 0.5 * pointwise_product(lat, d, d)
    return out


def matter_variation_integral(dom: Domain, psi: np.ndarray, psi_dot: np.ndarray,
                              eps: np.ndarray, scale: float = 1.0) -> tuple[np.ndarray, float]:
    """``int d^4X scale^-4 delta_eps L_M`` over x, and the size of the integrand.

    The size is the largest coefficient of ``delta_eps L_M`` times the mode
    weight, so the ratio measures how completely the integral cancels.
    """
    lat = dom.lattice
    lm = matter_lagrangian(dom, psi, psi_dot)
    dl = -advect(lat, eps, lm)
    w = dom.inner_volume * scale**-4
    return w * dl[..., lat.origin], w * float(np.max(np.abs(dl)))


def evolve_free_scalar(dom: Domain, psi: np.ndarray, psi_dot: np.ndarray, t: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Exact spectral propagation of ``d_0^2 psi = laplacian psi``."""
    grid = dom.grid
    axes = tuple(range(-grid.ndim - 1, -1))
    kk = np.zeros(grid.shape)
    for k, mu in enumerate(grid.axes):
        w = grid.wavenumbers(mu)
        shape = [1] * grid.ndim
        shape[k] = -1
        kk = kk + w.reshape(shape) ** 2
    omega_k = np.sqrt(kk)[..., None]
    ph = np.fft.fftn(psi, axes=axes)
    vh = np.fft.fftn(psi_dot, axes=axes)
    c = np.cos(omega_k * t)
    s = np.where(omega_k > 0, np.sin(omega_k * t) / np.where(omega_k > 0, omega_k, 1.0), t)
    sw = -omega_k * np.sin(omega_k * t)
    ph_t = c * ph + s * vh
    vh_t = sw * ph + c * vh
    return np.fft.ifftn(ph_t, axes=axes), np.fft.ifftn(vh_t, axes=axes)
