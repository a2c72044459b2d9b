"""Spectral representation of fields on the inner Minkowski space.

Fields are stored as Fourier-series coefficients on a truncated lattice of
inner momenta ``K_alpha = kappa0 * n_alpha`` (lower index, integer ``n``),
times a periodic collocation grid in spacetime.  Array layout is always::

    (*components, *grid, M)

with the inner mode axis last and the grid axes immediately before it.  An
inner scalar field is ``(*grid, M)``, an inner vector field (upper inner
index ``alpha``) is ``(4, *grid, M)``, a gauge field ``A_mu^alpha`` is
``(4, 4, *grid, M)``.

Conventions: ``eta = diag(-1, 1, 1, 1)`` for both spacetime and inner
indices, ``nabla_alpha -> i K_alpha``, and ``f(X) = sum_K c(K) exp(i K.X)``
over an inner box of side ``2 pi / kappa0``.

Products of inner fields are mode convolutions evaluated over an explicit
table of lattice pairs ``(p, q)`` with ``p + q`` on the lattice.  This is
the zero-padded (radius ``2R``) convolution followed by truncation, so
every retained coefficient is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])

STRICT_TIMELIKE = "strict-timelike"
INCLUDE_LIGHTLIKE = "include-lightlike"
NO_FILTER = "none"
FILTERS = (STRICT_TIMELIKE, INCLUDE_LIGHTLIKE, NO_FILTER)

ORIGIN, FORWARD, BACKWARD, EXCLUDED = "origin", "forward", "backward", "excluded"


class ConfigurationError(ValueError):
    """Invalid lattice, grid or run parameters."""


class ConstraintError(ValueError):
    """A field violates the divergence-free or reality invariant."""


@dataclass(frozen=True, eq=False)
class ModeLattice:
    """Truncated inner-momentum lattice.

    ``n`` holds the integer labels (M, 4); ``K = base_frequency * n`` are the
    lower-index momenta.  ``filter`` is ``"none"`` only for negative
    controls, where spacelike modes are admitted on purpose.
    """

    base_frequency: float
    radius: int
    filter: str
    n: np.ndarray

    @cached_property
    def K(self) -> np.ndarray:
        return self.base_frequency * self.n.astype(float)

    @property
    def size(self) -> int:
        return len(self.n)

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in row): i for i, row in enumerate(self.n)}

    @cached_property
    def origin(self) -> int:
        return self.index[(0, 0, 0, 0)]

    @cached_property
    def negation(self) -> np.ndarray:
        """Index map K -> -K."""
        return np.array([self.index[tuple(int(v) for v in -row)] for row in self.n])

    @cached_property
    def cone_class(self) -> np.ndarray:
        out = np.empty(self.size, dtype=object)
        for i, row in enumerate(self.n):
            n0, nv = int(row[0]), row[1:]
            if not row.any():
                out[i] = ORIGIN
            elif n0 * n0 < int(nv @ nv):
                out[i] = EXCLUDED
            elif n0 > 0:
                out[i] = FORWARD
            elif n0 < 0:
                out[i] = BACKWARD
            else:
                out[i] = EXCLUDED
        return out

    @cached_property
    def minus_k_squared(self) -> np.ndarray:
        """-K^2 = K_0^2 - |K_vec|^2 per mode."""
        K = self.K
        return K[:, 0] ** 2 - np.sum(K[:, 1:] ** 2, axis=1)

    @cached_property
    def pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (p, q, p+q) index triples with every member on the lattice."""
        span = 4 * self.radius + 1
        table = -np.ones((span,) * 4, dtype=np.int64)
        shift = 2 * self.radius
        table[tuple((self.n + shift).T)] = np.arange(self.size)
        s = self.n[:, None, :] + self.n[None, :, :] + shift
        out = table[s[..., 0], s[..., 1], s[..., 2], s[..., 3]]
        p, q = np.nonzero(out >= 0)
        return p, q, out[p, q]

    @cached_property
    def _scatter(self) -> scipy.sparse.csr_matrix:
        p, _, o = self.pairs
        return scipy.sparse.csr_matrix(
            (np.ones(len(p)), (o, np.arange(len(p)))), shape=(self.size, len(p))
        )

    def reduce_pairs(self, per_pair: np.ndarray) -> np.ndarray:
        """Sum a (..., npairs) array into output modes (..., M)."""
        lead = per_pair.shape[:-1]
        flat = per_pair.reshape(-1, per_pair.shape[-1])
        out = (self._scatter @ flat.T).T
        return np.ascontiguousarray(out).reshape(*lead, self.size)

    def with_base_frequency(self, base_frequency: float) -> ModeLattice:
        return ModeLattice(base_frequency, self.radius, self.filter, self.n)

    def same_as(self, other: ModeLattice) -> bool:
        return (
            self is other
            or (
                self.base_frequency == other.base_frequency
                and self.n.shape == other.n.shape
                and bool(np.all(self.n == other.n))
            )
        )


def build_mode_lattice(
    base_frequency: float, radius: int, filter: str = STRICT_TIMELIKE
) -> ModeLattice:
    """Enumerate integer modes with ``|n_alpha| <= radius`` passing the cone filter.

    ``strict-timelike`` keeps ``n_0^2 > |n|^2``; ``include-lightlike`` keeps
    ``n_0^2 >= |n|^2`` with ``n_0 != 0``; ``none`` keeps every mode.  The
    origin is always included.
    """
    if not base_frequency > 0:
        raise ConfigurationError(f"base_frequency must be > 0, got {base_frequency}")
    if int(radius) != radius or radius < 0:
        raise ConfigurationError(f"radius must be a non-negative integer, got {radius}")
    if filter not in FILTERS:
        raise ConfigurationError(f"unknown cone filter {filter!r}")
    r = np.arange(-radius, radius + 1)
    grid = np.stack(np.meshgrid(r, r, r, r, indexing="ij"), axis=-1).reshape(-1, 4)
    n0sq = grid[:, 0] ** 2
    nvsq = np.sum(grid[:, 1:] ** 2, axis=1)
    origin = ~grid.any(axis=1)
    if filter == STRICT_TIMELIKE:
        keep = n0sq > nvsq
    elif filter == INCLUDE_LIGHTLIKE:
        keep = (n0sq >= nvsq) & (grid[:, 0] != 0)
    else:
        keep = np.ones(len(grid), dtype=bool)
    return ModeLattice(float(base_frequency), int(radius), filter, grid[keep | origin])


@dataclass(frozen=True, eq=False)
class SpacetimeGrid:
    """Periodic collocation grid over the spacetime axes in ``axes``.

    Spatial configurations use ``axes=(3,)``, ``(1, 3)`` or ``(1, 2, 3)``.
    Axis 0 may be included to build a periodic spacetime box for
    Lagrangian-level identity checks.  Derivatives along absent axes vanish
    and absent axes carry unit volume.
    """

    axes: tuple[int, ...]
    sizes: tuple[int, ...]
    lengths: tuple[float, ...]
    dt: float = 0.01

    def __post_init__(self):
        if len(self.axes) != len(self.sizes) or len(self.axes) != len(self.lengths):
            raise ConfigurationError("axes, sizes and lengths must have equal length")
        if 3 not in self.axes:
            raise ConfigurationError("axis 3 must be present")
        if list(self.axes) != sorted(set(self.axes)) or not set(self.axes) <= {0, 1, 2, 3}:
            raise ConfigurationError(f"axes must be increasing spacetime indices, got {self.axes}")
        for n in self.sizes:
            if n < 4 or n & (n - 1):
                raise ConfigurationError(f"grid sizes must be powers of two >= 4, got {n}")
        for length in self.lengths:
            if not length > 0:
                raise ConfigurationError(f"grid lengths must be > 0, got {length}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")

    @classmethod
    def spatial(cls, d: int, n: int | Sequence[int], length: float | Sequence[float],
                dt: float = 0.01) -> SpacetimeGrid:
        axes = {1: (3,), 2: (1, 3), 3: (1, 2, 3)}.get(d)
        if axes is None:
            raise ConfigurationError(f"spatial dimension must be 1, 2 or 3, got {d}")
        sizes = (n,) * d if np.isscalar(n) else tuple(n)
        lengths = (float(length),) * d if np.isscalar(length) else tuple(map(float, length))
        return cls(axes, tuple(int(s) for s in sizes), lengths, dt)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for L, n in zip(self.lengths, self.sizes)]))

    def coordinates(self, mu: int) -> np.ndarray:
        """Coordinate values of axis ``mu`` broadcast to the grid shape."""
        out = np.zeros(self.shape)
        if mu in self.axes:
            k = self.axes.index(mu)
            x = np.arange(self.sizes[k]) * self.lengths[k] / self.sizes[k]
            shape = [1] * self.ndim
            shape[k] = -1
            out = out + x.reshape(shape)
        return out

    def wavenumbers(self, mu: int) -> np.ndarray:
        """Angular wavenumbers for first derivatives along ``mu`` (Nyquist zeroed)."""
        k = self.axes.index(mu)
        n = self.sizes[k]
        kk = 2 * np.pi * np.fft.fftfreq(n, d=self.lengths[k] / n)
        kk[n // 2] = 0.0
        return kk

    def _array_axis(self, mu: int) -> int:
        return self.axes.index(mu) - self.ndim - 1

    def _broadcast(self, mu: int, values: np.ndarray) -> np.ndarray:
        shape = [1] * (self.ndim + 1)
        shape[self.axes.index(mu)] = -1
        return values.reshape(shape)

    def derivative(self, f: np.ndarray, mu: int) -> np.ndarray:
        """Spectral partial derivative along spacetime axis ``mu``."""
        if mu not in self.axes:
            return np.zeros_like(f, dtype=complex)
        ax = self._array_axis(mu)
        kk = self._broadcast(mu, 1j * self.wavenumbers(mu))
        return np.fft.ifft(np.fft.fft(f, axis=ax) * kk, axis=ax)

    def fourier_multiplier(self, f: np.ndarray, mu: int, symbol: np.ndarray) -> np.ndarray:
        """Apply a Fourier multiplier ``symbol(k)`` along axis ``mu``."""
        ax = self._array_axis(mu)
        return np.fft.ifft(np.fft.fft(f, axis=ax) * self._broadcast(mu, symbol), axis=ax)

    def band_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Boolean mask over the grid-Fourier index space keeping ``|k| < fraction * N/2``."""
        mask = np.ones(self.shape, dtype=bool)
        for k, n in enumerate(self.sizes):
            m = np.abs(np.fft.fftfreq(n, d=1.0 / n)) < fraction * n / 2
            shape = [1] * self.ndim
            shape[k] = -1
            mask = mask & m.reshape(shape)
        return mask

    def band_project(self, f: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Project onto the grid-Fourier modes selected by ``mask``."""
        axes = tuple(range(-self.ndim - 1, -1))
        fh = np.fft.fftn(f, axes=axes)
        return np.fft.ifftn(fh * mask[..., None], axes=axes)


@dataclass(frozen=True, eq=False)
class Domain:
    """A mode lattice paired with a spacetime grid."""

    lattice: ModeLattice
    grid: SpacetimeGrid
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def field_shape(self) -> tuple[int, ...]:
        return (*self.grid.shape, self.lattice.size)

    @property
    def inner_volume(self) -> float:
        return (2 * np.pi / self.lattice.base_frequency) ** 4

    def zeros(self, *components: int) -> np.ndarray:
        return np.zeros((*components, *self.field_shape), dtype=complex)

    def integrate(self, density: np.ndarray, inner_measure: float = 1.0) -> np.ndarray:
        """Spacetime sum with cell volumes of a (*lead, *grid) array."""
        axes = tuple(range(-self.grid.ndim, 0))
        return np.sum(density, axis=axes) * self.grid.cell_volume * inner_measure

    def rescaled(self, rho: float) -> Domain:
        return Domain(self.lattice.with_base_frequency(self.lattice.base_frequency / rho), self.grid)


def _check_lattice(a: ModeLattice, b: ModeLattice) -> None:
    if not a.same_as(b):
        raise ConfigurationError("fields live on different mode lattices")


def spectral_derivative(lattice: ModeLattice, f: np.ndarray, beta: int) -> np.ndarray:
    """``nabla_beta f``: multiply each coefficient by ``i K_beta``."""
    return f * (1j * lattice.K[:, beta])


def divergence(lattice: ModeLattice, v: np.ndarray) -> np.ndarray:
    """Inner divergence ``nabla_alpha v^alpha`` of a (4, ..., M) field."""
    return 1j * np.einsum("a...m,ma->...m", v, lattice.K)


def divergence_residual(lattice: ModeLattice, v: np.ndarray) -> float:
    """``max |K_alpha v^alpha| / max(|K| |v|)``; zero for an admissible field."""
    scale = np.max(np.abs(lattice.K)) * np.max(np.abs(v)) if v.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(divergence(lattice, v))) / scale)


def symmetrize_reality(lattice: ModeLattice, f: np.ndarray) -> np.ndarray:
    """Enforce ``c(-K) = conj(c(K))``."""
    return 0.5 * (f + np.conj(f[..., lattice.negation]))


def reality_residual(lattice: ModeLattice, f: np.ndarray) -> float:
    scale = np.max(np.abs(f)) if f.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(f - np.conj(f[..., lattice.negation]))) / scale)


def inner_product(dom: Domain, psi: np.ndarray, chi: np.ndarray, scale: float = 1.0,
                  lattice: ModeLattice | None = None) -> complex:
    """Discrete ``<psi|chi> = int d^4x int d^4X scale^-4 psi^* chi``.

    ``scale`` is the inner length parameter; the mode weight is
    ``(2 pi / kappa0)^4 scale^-4`` (Parseval on the inner box).
    """
    if lattice is not None:
        _check_lattice(lattice, dom.lattice)
    if psi.shape != chi.shape:
        raise ConfigurationError("field shapes differ")
    w = dom.inner_volume * scale**-4
    return complex(np.sum(np.conj(psi) * chi) * dom.grid.cell_volume * w)


def pointwise_product(lattice: ModeLattice, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Coefficients of the product ``f(X) g(X)``, retained modes exact."""
    p, q, _ = lattice.pairs
    return lattice.reduce_pairs(f[..., p] * g[..., q])


def advect(lattice: ModeLattice, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``u^beta nabla_beta f`` for a vector field ``u`` (4, *grid, M).

    ``f`` may carry leading component axes; the grid and mode axes must
    match ``u``.
    """
    p, q, _ = lattice.pairs
    Kq = 1j * lattice.K[q]  # (npairs, 4)
    ud = np.einsum("b...j,jb->...j", u[..., p], Kq)
    return lattice.reduce_pairs(ud * f[..., q])


def lie_bracket(lattice: ModeLattice, E: np.ndarray, F: np.ndarray, check: bool = False,
                tol: float = 1e-10) -> np.ndarray:
    """``[E, F]^beta = E^alpha nabla_alpha F^beta - F^alpha nabla_alpha E^beta``."""
    if check:
        for name, v in (("E", E), ("F", F)):
            r = divergence_residual(lattice, v)
            if r > tol:
                raise ConstraintError(f"{name} is not divergence-free (residual {r:.2e})")
    return advect(lattice, E, F) - advect(lattice, F, E)


def project_divergence_free(lattice: ModeLattice, v: np.ndarray) -> np.ndarray:
    """Euclidean-orthogonal projection onto ``K_alpha c^alpha = 0`` per mode.

    The origin mode is left unchanged.
    """
    K = lattice.K
    k2 = np.sum(K**2, axis=1)
    safe = np.where(k2 > 0, k2, 1.0)
    kc = np.einsum("a...m,ma->...m", v, K)
    return v - np.einsum("ma,...m->a...m", K / safe[:, None], kc)


def single_mode(dom: Domain, label: Sequence[int], amplitude=1.0, components: int | None = None,
                polarization: Sequence[complex] | None = None) -> np.ndarray:
    """One-hot coefficient array at lattice label ``n``, constant over the grid."""
    idx = dom.lattice.index[tuple(int(v) for v in label)]
    if components is None:
        out = dom.zeros()
        out[..., idx] = amplitude
        return out
    out = dom.zeros(components)
    pol = np.asarray(polarization, dtype=complex)
    out[..., idx] = (amplitude * pol).reshape((components,) + (1,) * dom.grid.ndim)
    return out
