"""Axial-gauge Hamiltonian dynamics on a purely spatial grid.

The state holds the independent coefficients ``A_i^a`` and ``Pi_i^a`` for
``i = 1, 2`` and ``a = 1, 2, 3`` as arrays ``(2, 3, *grid, M)``.  The
timelike inner components follow from the divergence constraint,
``A_3 = 0`` by the gauge choice, and ``A_0`` from the Gauss constraint
with the x^3-constant mode of ``1/d_3^2`` set to zero.  ``Pi_j`` is the
electric field ``F_0j / scale``.

Two right-hand sides are available.  ``"canonical"`` is the exact
Hamiltonian vector field of ``H(A, Pi)``: the momentum conjugate to
``A^a`` is ``M(K) Pi`` and gradients are taken with the ``eta`` pairing,
whose bracket adjoint is ``ad*``.  ``"field-equations"`` evaluates the
covariant equations of motion directly, i.e. replaces ``ad*_X`` by
``-ad_X``.  Both agree whenever the pairing is bracket invariant, in
particular in the Abelian (``K = 0``) sector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .lagrangian_dynamics import four_momentum, stress_tensor
from .inner_space import (
    ETA,
    BACKWARD,
    FORWARD,
    ORIGIN,
    ConfigurationError,
    Domain,
    ModeLattice,
    advect,
    divergence_residual,
    lie_bracket,
    reality_residual,
    symmetrize_reality,
)

_SIG = np.diag(ETA)
CANONICAL = "canonical"
FIELD_EQUATIONS = "field-equations"


class EvolutionError(RuntimeError):
    def __init__(self, message: str, last_good: int):
        super().__init__(message)
        self.last_good = last_good


@dataclass
class CanonicalState:
    A: np.ndarray
    Pi: np.ndarray
    t: float = 0.0

    def copy(self) -> CanonicalState:
        return CanonicalState(self.A.copy(), self.Pi.copy(), self.t)


@dataclass(frozen=True)
class ModeKinetics:
    M: np.ndarray
    C: np.ndarray
    eigenvalues: np.ndarray


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    return -v if nz.size and v[nz[0]] < 0 else v


def mode_kinetics(K) -> ModeKinetics:
    """Kinetic matrix ``M_ab = delta_ab - K_a K_b / K_0^2`` and its diagonalizer.

    Rows of ``C`` are eigenvectors with ``C M C^T = diag(1, 1, -K^2/K_0^2)``;
    the third row is the unit spatial direction of ``K``.  Each row has its
    first nonzero component positive.
    """
    K = np.asarray(K, dtype=float)
    if K[0] == 0:
        raise ConfigurationError(f"mode kinetics needs K_0 != 0, got K={K.tolist()}")
    k = K[1:]
    M = np.eye(3) - np.outer(k, k) / K[0] ** 2
    lam3 = 1.0 - float(k @ k) / K[0] ** 2
    kn = np.linalg.norm(k)
    if kn == 0:
        return ModeKinetics(M, np.eye(3), np.array([1.0, 1.0, 1.0]))
    third = _fix_sign(k / kn)
    rows = []
    for e in np.eye(3)[np.argsort(np.abs(third), kind="stable")]:
        v = e - third * (third @ e) - sum(r * (r @ e) for r in rows)
        if np.linalg.norm(v) > 1e-8:
            rows.append(_fix_sign(v / np.linalg.norm(v)))
        if len(rows) == 2:
            break
    C = np.vstack(rows + [third])
    return ModeKinetics(M, C, np.array([1.0, 1.0, lam3]))


def reconstruct_timelike(lattice: ModeLattice, a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Insert ``c^0 = -K_a c^a / K_0`` ahead of the 3 spatial components on ``axis``.

    ``c^0`` is zero at ``K = 0``; a nonzero mode with ``K_0 = 0`` must carry
    no content.
    """
    K = lattice.K
    nonzero = np.any(lattice.n != 0, axis=1)
    a = np.moveaxis(a, axis, 0)
    singular = nonzero & (K[:, 0] == 0)
    if np.any(singular) and np.any(a[..., singular] != 0):
        raise ConfigurationError("a mode with K_0 = 0 and K != 0 carries field content")
    safe = np.where(K[:, 0] != 0, K[:, 0], 1.0)
    ratio = np.where(nonzero[:, None], K[:, 1:] / safe[:, None], 0.0)
    c0 = -np.einsum("a...m,ma->...m", a, ratio)
    return np.moveaxis(np.concatenate([c0[None], a]), 0, axis)


def conjugate_momenta(dom: Domain, A: np.ndarray, A_dot: np.ndarray, scale: float = 1.0
                      ) -> np.ndarray:
    """``Pi_j = (d_0 A_j - d_j A_0 + [A_0, A_j]) / scale`` for ``j = 1, 2``.

    ``A`` and ``A_dot`` are full (4, 4, *grid, M) gauge-field slices on a
    spatial grid; the result has shape (2, 4, *grid, M).
    """
    lat, grid = dom.lattice, dom.grid
    return np.stack([
        (A_dot[j] - grid.derivative(A[0], j) + lie_bracket(lat, A[0], A[j])) / scale
        for j in (1, 2)
    ])


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    """Axial-gauge dynamics on ``dom`` (spatial axes only) with inner length ``scale``.

    ``band`` is the fraction of the grid Nyquist range kept by the spatial
    Galerkin projection (``None`` disables it).  The default ``1/2`` keeps
    every quartic term of ``H`` alias free, so grid sums equal the
    continuum integrals of the band-limited fields and ``H`` is exactly
    invariant under continuous x-translations.
    """

    dom: Domain
    scale: float = 1.0
    form: str = CANONICAL
    band: float | None = 0.5
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if 0 in self.dom.grid.axes:
            raise ConfigurationError("the Hamiltonian grid must be spatial")
        if self.form not in (CANONICAL, FIELD_EQUATIONS):
            raise ConfigurationError(f"unknown dynamics form {self.form!r}")
        if not self.scale > 0:
            raise ConfigurationError("scale must be > 0")

    @property
    def lattice(self) -> ModeLattice:
        return self.dom.lattice

    @property
    def grid(self):
        return self.dom.grid

    @property
    def weight(self) -> float:
        """Volume weight of one (grid point, mode) coefficient in ``H``."""
        return self.grid.cell_volume * self.dom.inner_volume * self.scale**-4

    @cached_property
    def support(self) -> np.ndarray:
        cc = self.lattice.cone_class
        return np.array([c in (ORIGIN, FORWARD, BACKWARD) for c in cc])

    @cached_property
    def kinetics(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-mode ``C`` (M,3,3), third eigenvalue (M,), and ``M^-1`` (M,3,3)."""
        lat = self.lattice
        Cs, lam, Minv = [], [], []
        for K, n in zip(lat.K, lat.n):
            if not n.any():
                Cs.append(np.eye(3)); lam.append(1.0); Minv.append(np.eye(3))
                continue
            if K[0] == 0:
                Cs.append(np.eye(3)); lam.append(0.0); Minv.append(np.zeros((3, 3)))
                continue
            mk = mode_kinetics(K)
            Cs.append(mk.C)
            lam.append(mk.eigenvalues[2])
            Minv.append(np.linalg.pinv(mk.M) if abs(mk.eigenvalues[2]) < 1e-14
                        else np.linalg.inv(mk.M))
        return np.array(Cs), np.array(lam), np.array(Minv)

    @cached_property
    def band_mask(self) -> np.ndarray | None:
        return None if self.band is None else self.grid.band_mask(self.band)

    def project_band(self, f: np.ndarray) -> np.ndarray:
        if self.band_mask is None:
            return f
        return self.grid.band_project(f, self.band_mask)

    # -- constraint solving -------------------------------------------------

    def full(self, a: np.ndarray) -> np.ndarray:
        return reconstruct_timelike(self.lattice, a, axis=a.ndim - self.grid.ndim - 2)

    def gauss_source(self, A4: np.ndarray, P4: np.ndarray) -> np.ndarray:
        """``sum_i D_i Pi_i`` for the two transverse directions."""
        lat, grid = self.lattice, self.grid
        s = np.zeros(A4.shape[1:], dtype=complex)
        for i in range(2):
            s += grid.derivative(P4[i], i + 1) + lie_bracket(lat, A4[i], P4[i])
        return s

    @cached_property
    def _inverse_d3_squared(self) -> np.ndarray:
        k3 = self.grid.wavenumbers(3)
        return np.where(k3 != 0, -1.0 / np.where(k3 != 0, k3, 1.0) ** 2, 0.0)

    def solve_A0(self, A4: np.ndarray, P4: np.ndarray) -> tuple[np.ndarray, float]:
        """``A_0 = scale / d_3^2 sum_i D_i Pi_i`` and the relative size of the unsolvable part."""
        s = self.project_band(self.gauss_source(A4, P4))
        A0 = self.scale * self.grid.fourier_multiplier(s, 3, self._inverse_d3_squared)
        solvable = self.grid.fourier_multiplier(s, 3, (self._inverse_d3_squared != 0).astype(float))
        total = float(np.max(np.abs(s))) if s.size else 0.0
        dropped = float(np.max(np.abs(s - solvable))) / total if total else 0.0
        return A0, dropped

    def fields(self, state: CanonicalState):
        """Reconstructed ``A_i``, ``Pi_i`` (2, 4, ...) and ``A_0`` (4, ...)."""
        A4 = self.full(state.A)
        P4 = self.full(state.Pi)
        A0, _ = self.solve_A0(A4, P4)
        return A4, P4, A0

    def gauge_field(self, state: CanonicalState) -> np.ndarray:
        """Spacetime gauge field ``A_mu^alpha`` with ``A_3 = 0``."""
        A4, _, A0 = self.fields(state)
        A = np.zeros((4,) + A0.shape, dtype=complex)
        A[0], A[1], A[2] = A0, A4[0], A4[1]
        return A

    def field_strength(self, state: CanonicalState) -> np.ndarray:
        """``F_mn`` with the electric components ``F_0j = scale Pi_j``."""
        lat, grid, lam = self.lattice, self.grid, self.scale
        A4, P4, A0 = self.fields(state)
        F = np.zeros((4, 4) + A0.shape, dtype=complex)
        F[0, 1], F[0, 2] = lam * P4[0], lam * P4[1]
        F[0, 3] = -grid.derivative(A0, 3)
        F[1, 2] = (grid.derivative(A4[1], 1) - grid.derivative(A4[0], 2)
                   + lie_bracket(lat, A4[0], A4[1]))
        F[1, 3] = -grid.derivative(A4[0], 3)
        F[2, 3] = -grid.derivative(A4[1], 3)
        for m in range(4):
            for n in range(m + 1, 4):
                F[n, m] = -F[m, n]
        return F

    def gauss_residual(self, state: CanonicalState) -> float:
        """Relative residual of ``sum_k D_k Pi_k = 0`` with ``Pi_3 = -d_3 A_0 / scale``.

        With the Galerkin band active the band-projected law is measured.
        """
        lat, grid = self.lattice, self.grid
        A4, P4, A0 = self.fields(state)
        terms = []
        for i in range(2):
            terms.append(grid.derivative(P4[i], i + 1))
            terms.append(lie_bracket(lat, A4[i], P4[i]))
        terms = [self.project_band(t) for t in terms]
        terms.append(-grid.derivative(grid.derivative(A0, 3), 3) / self.scale)
        resid = sum(terms)
        scale = sum(float(np.sqrt(np.sum(np.abs(t) ** 2))) for t in terms)
        return float(np.sqrt(np.sum(np.abs(resid) ** 2)) / scale) if scale else 0.0

    # -- Hamiltonian ----------------------------------------------------------

    def _pair(self, f: np.ndarray, g: np.ndarray) -> float:
        """eta pairing summed over grid and modes, times the coefficient weight."""
        s = np.sum(_SIG.reshape(4, *([1] * (f.ndim - 1))) * np.conj(f) * g)
        return float(np.real(s)) * self.weight

    def hamiltonian(self, state: CanonicalState) -> float:
        lam = self.scale
        grid = self.grid
        A4, P4, A0 = self.fields(state)
        F = self.field_strength(state)
        d3A0 = grid.derivative(A0, 3)
        h = 0.5 / lam**2 * self._pair(d3A0, d3A0)
        h += 0.5 * sum(self._pair(P4[i], P4[i]) for i in range(2))
        h += 0.5 / lam**2 * self._pair(F[1, 2], F[1, 2])
        for i in range(2):
            d = grid.derivative(A4[i], 3)
            h += 0.5 / lam**2 * self._pair(d, d)
        return h

    def _tilde_norm(self, a: np.ndarray) -> float:
        """``sum eigenvalue * |C a|^2`` for spatial components (3, *grid, M)."""
        C, lam3, _ = self.kinetics
        t = np.einsum("mab,b...m->a...m", C, a)
        w = np.stack([np.ones_like(lam3), np.ones_like(lam3), lam3])
        return float(np.sum(w.reshape(3, *([1] * self.grid.ndim), -1) * np.abs(t) ** 2)) * self.weight

    def hamiltonian_tilde(self, state: CanonicalState) -> float:
        """``H`` evaluated mode by mode in the rotated variables."""
        lam = self.scale
        grid = self.grid
        _, _, A0 = self.fields(state)
        F = self.field_strength(state)
        h = 0.5 / lam**2 * self._tilde_norm(grid.derivative(A0, 3)[1:])
        h += 0.5 * sum(self._tilde_norm(state.Pi[i]) for i in range(2))
        h += 0.5 / lam**2 * self._tilde_norm(F[1, 2][1:])
        for i in range(2):
            h += 0.5 / lam**2 * self._tilde_norm(grid.derivative(state.A[i], 3))
        return h

    # -- tilde variables ------------------------------------------------------

    def to_tilde(self, a: np.ndarray) -> np.ndarray:
        C = self.kinetics[0]
        return np.einsum("mab,ib...m->ia...m", C, a)

    def from_tilde(self, t: np.ndarray) -> np.ndarray:
        C = self.kinetics[0]
        return np.einsum("mba,ib...m->ia...m", C, t)

    # -- dynamics -------------------------------------------------------------

    def ad_dual(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """``ad*_X Z`` with ``<Z, [X, Y]> = <ad*_X Z, Y>`` under the eta pairing."""
        if self.form == FIELD_EQUATIONS:
            return -lie_bracket(self.lattice, X, Z)
        lat = self.lattice
        p, q, _ = lat.pairs
        zx = np.einsum("a,a...j,a...j->...j", _SIG, Z[..., p], X[..., q])
        sym = lat.reduce_pairs(zx[None] * (1j * lat.K[q].T).reshape(4, *([1] * self.grid.ndim), -1))
        return -advect(lat, X, Z) - _SIG.reshape(4, *([1] * (Z.ndim - 1))) * sym

    def independent(self, G: np.ndarray) -> np.ndarray:
        """Map a 4-component eta-gradient to ``M^-1`` times the gradient in ``c^a``."""
        K = self.lattice.K
        ratio = np.where(K[:, 0] != 0, 1.0 / np.where(K[:, 0] != 0, K[:, 0], 1.0), 0.0)
        g = G[1:] + G[0][None] * (K[:, 1:] * ratio[:, None]).T.reshape(3, *([1] * self.grid.ndim), -1)
        return np.einsum("mab,b...m->a...m", self.kinetics[2], g)

    def time_derivatives(self, state: CanonicalState) -> tuple[np.ndarray, np.ndarray]:
        lat, grid, lam = self.lattice, self.grid, self.scale
        A4, P4, A0 = self.fields(state)
        F = self.field_strength(state)
        dA = np.empty_like(state.A, dtype=complex)
        dP = np.empty_like(state.Pi, dtype=complex)
        Ak = [A4[0], A4[1], np.zeros_like(A0)]
        for j in range(2):
            gp = P4[j] + (grid.derivative(A0, j + 1) - self.ad_dual(A4[j], A0)) / lam
            dA[j] = lam * self.independent(gp)
            ga = self.ad_dual(P4[j], A0) / lam
            for k in range(3):
                fkj = F[k + 1, j + 1]
                ga = ga + (-grid.derivative(fkj, k + 1) + self.ad_dual(Ak[k], fkj)) / lam**2
            dP[j] = -lam * self.independent(ga)
        mask = self.support.astype(float)
        return self.project_band(dA) * mask, self.project_band(dP) * mask

    # -- integration ----------------------------------------------------------

    def clean(self, state: CanonicalState) -> CanonicalState:
        lat = self.lattice
        mask = self.support.astype(float)
        A = self.project_band(symmetrize_reality(lat, state.A)) * mask
        P = self.project_band(symmetrize_reality(lat, state.Pi)) * mask
        return CanonicalState(A, P, state.t)

    def step(self, state: CanonicalState, dt: float, integrator: str = "rk4",
             tol: float = 1e-14, max_iter: int = 100) -> CanonicalState:
        f = self.time_derivatives
        if integrator == "rk4":
            k1 = f(state)
            s2 = CanonicalState(state.A + 0.5 * dt * k1[0], state.Pi + 0.5 * dt * k1[1])
            k2 = f(s2)
            s3 = CanonicalState(state.A + 0.5 * dt * k2[0], state.Pi + 0.5 * dt * k2[1])
            k3 = f(s3)
            s4 = CanonicalState(state.A + dt * k3[0], state.Pi + dt * k3[1])
            k4 = f(s4)
            A = state.A + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            P = state.Pi + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        elif integrator == "midpoint":
            k = f(state)
            A, P = state.A + dt * k[0], state.Pi + dt * k[1]
            for _ in range(max_iter):
                mid = CanonicalState(0.5 * (state.A + A), 0.5 * (state.Pi + P))
                k = f(mid)
                A_new, P_new = state.A + dt * k[0], state.Pi + dt * k[1]
                change = max(np.max(np.abs(A_new - A)), np.max(np.abs(P_new - P)))
                A, P = A_new, P_new
                if change <= tol * max(1.0, np.max(np.abs(A)), np.max(np.abs(P))):
                    break
        else:
            raise ConfigurationError(f"unknown integrator {integrator!r}")
        return self.clean(CanonicalState(A, P, state.t + dt))

    def momentum(self, state: CanonicalState) -> np.ndarray:
        """``p_mu = int d^dx Theta^0_mu`` from the improved stress tensor."""
        F = self.field_strength(state)
        return four_momentum(self.dom, stress_tensor(self.dom, F, self.scale).theta)

    def diagnostics(self, state: CanonicalState) -> dict:
        lat = self.lattice
        A4 = self.full(state.A)
        P4 = self.full(state.Pi)
        div = max(divergence_residual(lat, A4[i]) for i in range(2))
        div = max(div, max(divergence_residual(lat, P4[i]) for i in range(2)))
        reality = max(reality_residual(lat, state.A), reality_residual(lat, state.Pi))
        off = ~self.support
        total = float(np.max(np.abs(state.A)) + np.max(np.abs(state.Pi))) or 1.0
        leak = float(np.max(np.abs(state.A[..., off]), initial=0.0)
                     + np.max(np.abs(state.Pi[..., off]), initial=0.0)) / total
        return {
            "gauss_residual": self.gauss_residual(state),
            "divfree_residual": div,
            "reality_residual": reality,
            "support_leak": leak,
        }

    def evolve(self, state: CanonicalState, dt: float, steps: int, integrator: str = "rk4",
               every: int = 1, callback=None) -> list[CanonicalState]:
        """Integrate ``steps`` steps; returns snapshots every ``every`` steps (incl. t=0)."""
        if not dt > 0:
            raise ConfigurationError("dt must be > 0")
        snaps = [state]
        if callback:
            callback(0, state)
        current = state
        for n in range(1, steps + 1):
            current = self.step(current, dt, integrator)
            if not (np.all(np.isfinite(current.A)) and np.all(np.isfinite(current.Pi))):
                raise EvolutionError(f"non-finite state at step {n}", last_good=n - 1)
            if n % every == 0 or n == steps:
                snaps.append(current)
                if callback:
                    callback(n, current)
        return snaps


def project_gauss_zero_mode(sys: HamiltonianSystem, state: CanonicalState) -> CanonicalState:
    """Least-norm band-limited change of ``Pi`` that removes the x^3-constant Gauss source.

    ``1/d_3^2`` cannot absorb the x^3-independent part of ``sum_i D_i Pi_i``,
    so admissible initial data must have it vanish.  On ``d = 1`` grids this
    part is ``mean_x sum_i [A_i, Pi_i]``, linear in ``Pi``.
    """
    grid, lat = sys.grid, sys.lattice
    if grid.ndim != 1:
        raise ConfigurationError("the Gauss zero-mode projection supports d = 1 grids only")
    N, M = grid.sizes[0], lat.size
    A4 = sys.full(state.A)
    Ahat = np.fft.fft(A4, axis=-2) / N
    ks = np.flatnonzero(sys.band_mask if sys.band_mask is not None else grid.band_mask(1.0))
    units = np.zeros((3, 3 * M, M), dtype=complex)
    for a in range(3):
        units[a, a * M + np.arange(M), np.arange(M)] = 1.0
    units = reconstruct_timelike(lat, units)
    blocks, labels = [], []
    for k in ks:
        for i in range(2):
            X = np.broadcast_to(Ahat[i, :, (-k) % N, None, :], units.shape)
            blocks.append(lie_bracket(lat, np.ascontiguousarray(X), units))
            labels.append((k, i))
    L = np.concatenate([b.transpose(0, 2, 1).reshape(4 * M, 3 * M) for b in blocks], axis=1)
    q = sys.gauss_source(A4, sys.full(state.Pi)).mean(axis=-2).ravel()
    sol, *_ = np.linalg.lstsq(L, -q, rcond=None)
    x = np.arange(N)
    dPi = np.zeros_like(state.Pi, dtype=complex)
    for n, (k, i) in enumerate(labels):
        c = sol[n * 3 * M:(n + 1) * 3 * M].reshape(3, M)
        dPi[i] += c[:, None, :] * np.exp(2j * np.pi * k * x / N)[None, :, None]
    return sys.clean(CanonicalState(state.A, state.Pi + dPi, state.t))


_CENTRAL_WEIGHTS = {
    3: (-1 / 2, 0.0, 1 / 2),
    5: (1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12),
    7: (-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60),
    9: (1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280),
}


def stress_divergence(sys: HamiltonianSystem, snapshots: list[CanonicalState], dt: float
                      ) -> tuple[np.ndarray, np.ndarray]:
    """``d_0 Theta^0_nu + sum_k d_k Theta^k_nu`` at the centre of equally spaced snapshots.

    The time derivative is the centered difference of maximal order for
    3, 5, 7 or 9 snapshots.  Returns the residual (4, *grid) and the summed
    magnitude of its two parts for normalization.
    """
    weights = _CENTRAL_WEIGHTS.get(len(snapshots))
    if weights is None:
        raise ValueError(f"need 3, 5, 7 or 9 snapshots, got {len(snapshots)}")
    th = [stress_tensor(sys.dom, sys.field_strength(s), sys.scale).theta for s in snapshots]
    d0 = sum(w * t[0] for w, t in zip(weights, th) if w) / dt
    centre = th[len(th) // 2]
    dk = np.zeros_like(d0)
    for mu in sys.grid.axes:
        dk += np.real(sys.grid.derivative(centre[mu][..., None], mu)[..., 0])
    return d0 + dk, np.abs(d0) + np.abs(dk)


def stress_divergence_rate(sys: HamiltonianSystem, state: CanonicalState, rel_step: float = 1e-4
                           ) -> float:
    """Relative size of ``d_mu Theta^mu_nu`` at one state.

    ``d_0 Theta^0_nu`` is the centered difference of ``Theta`` along the
    flow vector ``(dA/dt, dPi/dt)`` with a step of ``rel_step`` times the
    state-to-velocity norm ratio.  Returns max|residual| over the max of
    the summed magnitudes of its two parts (0 for a static zero state).
    """
    dA, dP = sys.time_derivatives(state)
    vnorm = math.sqrt(float(np.sum(np.abs(dA) ** 2) + np.sum(np.abs(dP) ** 2)))
    snorm = math.sqrt(float(np.sum(np.abs(state.A) ** 2) + np.sum(np.abs(state.Pi) ** 2)))
    if vnorm == 0:
        return 0.0
    h = rel_step * snorm / vnorm
    snaps = [CanonicalState(state.A + s * h * dA, state.Pi + s * h * dP, state.t + s * h)
             for s in (-1, 0, 1)]
    resid, size = stress_divergence(sys, snaps, h)
    top = float(np.max(size))
    return float(np.max(np.abs(resid))) / top if top else 0.0


# -- initial conditions --------------------------------------------------------


def zero_state(sys: HamiltonianSystem) -> CanonicalState:
    shape = (2, 3, *sys.dom.field_shape)
    return CanonicalState(np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex))


def maxwell_plane_wave(sys: HamiltonianSystem, k3: int = 1, amplitude: float = 1.0,
                       polarization: tuple[int, int] = (1, 1)) -> CanonicalState:
    """``A_i^a = amplitude cos(k (x^3 - t))`` in the ``K = 0`` inner mode.

    ``polarization = (a, i)``; ``k = 2 pi k3 / L_3``.
    """
    a, i = polarization
    grid = sys.grid
    L3 = grid.lengths[grid.axes.index(3)]
    k = 2 * np.pi * k3 / L3
    x3 = grid.coordinates(3)
    state = zero_state(sys)
    o = sys.lattice.origin
    state.A[i - 1, a - 1, ..., o] = amplitude * np.cos(k * x3)
    state.Pi[i - 1, a - 1, ..., o] = amplitude * k * np.sin(k * x3) / sys.scale
    return state


def random_cone_state(sys: HamiltonianSystem, seed: int = 0, amplitude: float = 1.0,
                      max_harmonic: int | None = None) -> CanonicalState:
    """Random admissible state drawn in tilde variables on cone-supported modes.

    Coefficients have unit-variance real and imaginary parts, are
    reality-symmetrized per mode, rotated back with ``C^T`` and limited to
    spatial harmonics ``|k| <= max_harmonic`` (default: the Galerkin band).
    """
    rng = np.random.default_rng(seed)
    grid, lat = sys.grid, sys.lattice
    shape = (2, 3, *sys.dom.field_shape)
    mask = sys.support.astype(float)
    if max_harmonic is None:
        keep = sys.band_mask if sys.band_mask is not None else grid.band_mask(1.0)
    else:
        keep = np.ones(grid.shape, dtype=bool)
        for k, n in enumerate(grid.sizes):
            m = np.abs(np.fft.fftfreq(n, d=1.0 / n)) <= max_harmonic
            s = [1] * grid.ndim
            s[k] = -1
            keep = keep & m.reshape(s)
    out = []
    for _ in range(2):
        t = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        a = symmetrize_reality(lat, sys.from_tilde(t) * mask)
        # reality pairs K with -K pointwise in x, so the spatial filter keeps it
        a = symmetrize_reality(lat, grid.band_project(a, keep))
        out.append(amplitude * a)
    return CanonicalState(out[0], out[1])


def spacelike_control_state(sys: HamiltonianSystem, label=(1, 2, 0, 0), amplitude: float = 1.0
                            ) -> CanonicalState:
    """Pure third-polarization momentum at ``+-label`` on an unfiltered lattice."""
    lat = sys.lattice
    idx = lat.index[tuple(label)]
    neg = lat.negation[idx]
    mk = mode_kinetics(lat.K[idx])
    state = zero_state(sys)
    pol = mk.C[2]
    for i in range(2):
        for a in range(3):
            state.Pi[i, a, ..., idx] = amplitude * pol[a]
            state.Pi[i, a, ..., neg] = amplitude * pol[a]
    return state
