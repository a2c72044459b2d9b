"""Named check suites, one per verification target.

Each suite returns a list of :class:`Check` records.  A check compares a
measured value against a tolerance; tolerances can be overridden per
check name (``tolerance.<name>`` in a run config).
"""
from __future__ import annotations

import hashlib
import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .gauge_kinematics import (
    PAIRS,
    bianchi_residual,
    field_strength,
    gauge_variation_A,
    gauge_variation_F,
    rescale,
)
from .hamiltonian_dynamics import (
    HamiltonianSystem,
    mode_kinetics,
    maxwell_plane_wave,
    project_gauss_zero_mode,
    random_cone_state,
    spacelike_control_state,
    stress_divergence,
    zero_state,
)
from .inner_space import (
    NO_FILTER,
    Domain,
    SpacetimeGrid,
    build_mode_lattice,
    divergence_residual,
    inner_product,
    lie_bracket,
    project_divergence_free,
    spectral_derivative,
    symmetrize_reality,
)
from .lagrangian_dynamics import (
    action,
    evolve_free_scalar,
    field_eq_residual,
    matter_probe_current,
    matter_variation_integral,
)
from .regulator import omega, omega_oracle

OMEGA1_REFERENCE = 1.0 / (720.0 * (4.0 * math.pi) ** 3)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    relation: str
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.6e} {self.relation} {self.tolerance:.6e}"


@dataclass
class SuiteContext:
    seed: int = 0
    tolerances: Mapping[str, float] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    def _tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def at_most(self, name: str, value: float, default: float) -> None:
        tol = self._tol(name, default)
        value = float(value)
        self.checks.append(Check(name, value, tol, "<=", bool(value <= tol)))

    def below(self, name: str, value: float, default: float) -> None:
        """Strict bound, used for the expected-negative control."""
        tol = self._tol(name, default)
        value = float(value)
        self.checks.append(Check(name, value, tol, "<", bool(value < tol)))

    def at_least(self, name: str, value: float, default: float) -> None:
        tol = self._tol(name, default)
        value = float(value)
        self.checks.append(Check(name, value, tol, ">=", bool(value >= tol)))


def _rng(ctx: SuiteContext, salt: int) -> np.random.Generator:
    return np.random.default_rng([ctx.seed, salt])


def _random_vector(rng, lat, grid, lead=(), band: float | None = 0.5) -> np.ndarray:
    """Real divergence-free random inner vector field(s) of shape (*lead, 4, *grid, M)."""
    shape = (*lead, 4, *grid.shape, lat.size)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if band is not None:
        v = grid.band_project(v, grid.band_mask(band))
    flat = v.reshape(-1, *v.shape[len(lead):])
    flat = np.stack([project_divergence_free(lat, x) for x in flat])
    return symmetrize_reality(lat, flat.reshape(shape))


def _random_scalar(rng, lat, grid) -> np.ndarray:
    shape = (*grid.shape, lat.size)
    return symmetrize_reality(lat, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _rel(a, b) -> float:
    den = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / den if den else 0.0


# -- suites -------------------------------------------------------------------


def regulator_suite(ctx: SuiteContext, samples: int = 10**7) -> None:
    value = omega(1)
    ctx.at_most("omega1_reference_rel_error", abs(value - OMEGA1_REFERENCE) / OMEGA1_REFERENCE, 1e-6)
    mc, err = omega_oracle(1, samples, seed=ctx.seed)
    ctx.at_most("omega1_reference_mc_sigma", abs(mc - OMEGA1_REFERENCE) / err, 3.0)
    ctx.at_most("omega1_quadrature_mc_sigma", abs(mc - value) / err, 3.0)


def _retained_triples(lat):
    """Mode triples whose pairwise and total sums all stay on the lattice."""
    members = set(map(tuple, lat.n))
    p, q, _ = lat.pairs
    out = []
    for a, b in zip(p, q):
        if a > b:
            continue
        for c in range(lat.size):
            na, nb, nc = lat.n[a], lat.n[b], lat.n[c]
            if all(tuple(s) in members for s in (na + nb, nb + nc, na + nc, na + nb + nc)):
                out.append((a, b, c))
    return out


def algebra_suite(ctx: SuiteContext) -> None:
    lat = build_mode_lattice(1.0, 2)
    grid = SpacetimeGrid.spatial(1, 8, 2 * np.pi)
    dom = Domain(lat, grid)
    rng = _rng(ctx, 2)
    E, F = _random_vector(rng, lat, grid, band=None), _random_vector(rng, lat, grid, band=None)
    EF, FE = lie_bracket(lat, E, F), lie_bracket(lat, F, E)
    ctx.at_most("bracket_divergence", divergence_residual(lat, EF), 1e-12)
    ctx.at_most("bracket_antisymmetry", float(np.max(np.abs(EF + FE))), 0.0)

    worst = 0.0
    for a, b, c in _retained_triples(lat):
        fields = []
        for m in (a, b, c):
            v = np.zeros((4, 1, lat.size), dtype=complex)
            v[:, 0, m] = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            fields.append(project_divergence_free(lat, v))
        X, Y, Z = fields
        terms = [lie_bracket(lat, X, lie_bracket(lat, Y, Z)),
                 lie_bracket(lat, Y, lie_bracket(lat, Z, X)),
                 lie_bracket(lat, Z, lie_bracket(lat, X, Y))]
        size = sum(float(np.max(np.abs(t))) for t in terms)
        natural = np.prod([np.max(np.abs(f)) for f in fields]) * np.max(np.abs(lat.K)) ** 2
        if size > 1e-12 * natural:
            worst = max(worst, float(np.max(np.abs(sum(terms)))) / size)
    ctx.at_most("jacobi_retained_triples", worst, 1e-10)

    psi, chi = _random_scalar(rng, lat, grid), _random_scalar(rng, lat, grid)
    worst = 0.0
    for beta in range(4):
        x = inner_product(dom, psi, spectral_derivative(lat, chi, beta))
        y = inner_product(dom, spectral_derivative(lat, psi, beta), chi)
        worst = max(worst, abs(x + y) / (abs(x) + abs(y)))
    ctx.at_most("nabla_antihermitian", worst, 1e-12)


def kinematics_suite(ctx: SuiteContext) -> None:
    lat = build_mode_lattice(1.0, 2)
    grid = SpacetimeGrid.spatial(1, 8, 2 * np.pi)
    dom = Domain(lat, grid)
    rng = _rng(ctx, 3)
    A = 0.3 * _random_vector(rng, lat, grid, lead=(4,))
    eps = 0.3 * _random_vector(rng, lat, grid)
    F = field_strength(dom, A)
    dA = gauge_variation_A(dom, A, eps)
    ctx.at_most("field_strength_divergence",
                max(divergence_residual(lat, F[m, n]) for m, n in PAIRS), 1e-12)
    ctx.at_most("gauge_variation_divergence",
                max(divergence_residual(lat, dA[mu]) for mu in range(4)), 1e-12)

    dF = gauge_variation_F(dom, F, eps)
    ts = np.array([1e-2, 5e-3, 2.5e-3])
    errs = [np.linalg.norm(field_strength(dom, A + t * dA) - F - t * dF) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(errs), 1)[0]
    ctx.at_most("gauge_covariance_slope_error", abs(slope - 2.0), 0.05)
    ctx.at_most("bianchi", bianchi_residual(dom, A, F), 1e-10)

    L = action(dom, A)
    worst = 0.0
    for rho in (0.5, 2.0, 3.0):
        A2, scale2, dom2 = rescale(dom, A, 1.0, rho)
        worst = max(worst, abs(action(dom2, A2, scale2) - L) / abs(L))
    ctx.at_most("scale_invariance", worst, 1e-12)


def constraint_suite(ctx: SuiteContext) -> None:
    lat = build_mode_lattice(1.0, 2)
    sys = HamiltonianSystem(Domain(lat, SpacetimeGrid.spatial(1, 16, 2 * np.pi)))
    state = project_gauss_zero_mode(sys, random_cone_state(sys, seed=ctx.seed, amplitude=0.2))
    ctx.at_most("gauss_after_solve", sys.gauss_residual(state), 1e-12)
    A4, P4 = sys.full(state.A), sys.full(state.Pi)
    ctx.at_most("reconstruct_divergence",
                max(divergence_residual(lat, f[i]) for f in (A4, P4) for i in range(2)), 1e-14)
    h1, h2 = sys.hamiltonian(state), sys.hamiltonian_tilde(state)
    ctx.at_most("hamiltonian_two_route", abs(h1 - h2) / abs(h1), 1e-12)

    worst = 0.0
    for K, n in zip(lat.K, lat.n):
        if not n.any():
            continue
        mk = mode_kinetics(K)
        expected = np.sort([1.0, 1.0, -(K[1:] @ K[1:] - K[0] ** 2) / K[0] ** 2])
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(mk.M) - expected))))
        worst = max(worst, float(np.max(np.abs(mk.C @ mk.M @ mk.C.T - np.diag(mk.eigenvalues)))))
    ctx.at_most("kinetic_eigenvalues", worst, 1e-12)
    worked = mode_kinetics(np.array([2.0, 1.0, 0.0, 0.0]))
    ctx.at_most("kinetic_worked_case", abs(worked.eigenvalues[2] - 0.75), 1e-12)


def gradient_suite(ctx: SuiteContext, n_modes: int = 10, h: float = 1e-5) -> None:
    lat = build_mode_lattice(1.0, 2)
    grid = SpacetimeGrid.spatial(1, 8, 2 * np.pi)
    sys = HamiltonianSystem(Domain(lat, grid), band=None)
    state = random_cone_state(sys, seed=ctx.seed, amplitude=0.2)
    dA, dP = sys.time_derivatives(state)
    _, _, Minv = sys.kinetics
    rng = _rng(ctx, 5)
    reps = [m for m in range(lat.size) if m <= lat.negation[m]]
    others = [m for m in reps if m != lat.origin]
    modes = [lat.origin] + list(rng.choice(others, size=n_modes - 1, replace=False))
    worst = 0.0
    for m in modes:
        neg = lat.negation[m]
        mult = 1 if neg == m else 2
        units = (1.0,) if neg == m else (1.0, 1j)
        for which in ("A", "Pi"):
            for i in range(2):
                for x in range(grid.sizes[0]):
                    grad = np.zeros(3, dtype=complex)
                    for a in range(3):
                        for u in units:
                            vals = []
                            for sign in (1.0, -1.0):
                                s = state.copy()
                                arr = s.A if which == "A" else s.Pi
                                arr[i, a, x, m] += sign * h * u
                                if neg != m:
                                    arr[i, a, x, neg] += sign * h * np.conj(u)
                                vals.append(sys.hamiltonian(s))
                            grad[a] += (vals[0] - vals[1]) / (2 * h) * u
                    pred = sys.scale / (mult * sys.weight) * (Minv[m] @ grad)
                    got = dA[i, :, x, m] if which == "Pi" else -dP[i, :, x, m]
                    den = max(float(np.max(np.abs(got))), float(np.max(np.abs(pred))), 1e-300)
                    worst = max(worst, float(np.max(np.abs(pred - got))) / den)
    ctx.at_most("gradient_fd_rel_error", worst, 1e-6)


def maxwell_suite(ctx: SuiteContext) -> None:
    L3 = 2 * np.pi
    k = 2 * np.pi / L3
    box = SpacetimeGrid((0, 3), (16, 16), (L3, L3))
    lat = build_mode_lattice(1.0, 1)
    dom = Domain(lat, box)
    A = dom.zeros(4, 4)
    A[1, 1, ..., lat.origin] = np.cos(k * (box.coordinates(3) - box.coordinates(0)))
    _, resid = field_eq_residual(dom, A)
    ctx.at_most("maxwell_field_equation", resid, 1e-10)

    sys = HamiltonianSystem(Domain(lat, SpacetimeGrid.spatial(1, 16, L3)))
    period = 2 * np.pi / k
    state = maxwell_plane_wave(sys, k3=1)
    per = 200
    dt = period / per
    snaps = sys.evolve(state, dt, per)
    coeff = np.array([np.fft.fft(s.A[0, 0, :, lat.origin])[1] for s in snaps])
    t = np.array([s.t for s in snaps])
    w = -np.polyfit(t, np.unwrap(np.angle(coeff)), 1)[0]
    ctx.at_most("maxwell_dispersion_rel_error", abs(w - k) / k, 1e-6)

    H0 = sys.hamiltonian(state)
    long = sys.evolve(state, dt, 10 * per, every=per)
    drift = max(abs(sys.hamiltonian(s) - H0) / H0 for s in long)
    ctx.at_most("maxwell_energy_drift", drift, 1e-8)

    counts = [20, 40, 80]
    errs = []
    for n in counts:
        end = sys.evolve(state, period / n, n, every=n)[-1]
        errs.append(float(np.max(np.abs(end.A - state.A)) + np.max(np.abs(end.Pi - state.Pi))))
    slope = -np.polyfit(np.log(counts), np.log(errs), 1)[0]
    ctx.at_most("rk4_order_slope_error", abs(slope - 4.0), 0.3)


def conservation_suite(ctx: SuiteContext, dt: float = 0.01, t_end: float = 1.0) -> None:
    lat = build_mode_lattice(1.0, 2)
    sys = HamiltonianSystem(Domain(lat, SpacetimeGrid.spatial(1, 16, 2 * np.pi)))
    state = project_gauss_zero_mode(sys, random_cone_state(sys, seed=ctx.seed, amplitude=0.2))
    steps = int(round(t_end / dt))
    snaps = sys.evolve(state, dt, steps)
    H = np.array([sys.hamiltonian(s) for s in snaps])
    p = np.array([sys.momentum(s) for s in snaps])
    ctx.at_most("nonlinear_H_drift", float(np.max(np.abs(H - H[0]))) / abs(H[0]), 1e-6)
    ctx.at_most("nonlinear_p3_drift", float(np.max(np.abs(p[:, 3] - p[0, 3]))) / abs(p[0, 3]), 1e-6)
    diags = [sys.diagnostics(s) for s in snaps]
    ctx.at_most("nonlinear_gauss_max", max(d["gauss_residual"] for d in diags), 1e-8)
    ctx.at_most("nonlinear_divergence_max", max(d["divfree_residual"] for d in diags), 1e-8)

    c = steps // 2
    div, size = stress_divergence(sys, snaps[c - 4:c + 5], dt)
    measured = float(np.max(np.abs(div))) / float(np.max(size))
    mid = snaps[c]
    two = sys.step(sys.step(mid, dt), dt)
    one = sys.step(mid, 2 * dt)
    norm = float(max(np.max(np.abs(mid.A)), np.max(np.abs(mid.Pi))))
    local = float(max(np.max(np.abs(two.A - one.A)), np.max(np.abs(two.Pi - one.Pi)))) / 15 / norm
    ctx.at_most("stress_divergence_over_local_tolerance", measured / (local / dt), 10.0)
    ctx.at_most("H_equals_p0", float(np.max(np.abs(H - p[:, 0]) / np.abs(H))), 1e-10)


def positivity_suite(ctx: SuiteContext, draws: int = 1000) -> None:
    lat = build_mode_lattice(1.0, 2)
    sys = HamiltonianSystem(Domain(lat, SpacetimeGrid.spatial(1, 8, 2 * np.pi)))
    values = [sys.hamiltonian(random_cone_state(sys, seed=ctx.seed * draws + j)) for j in range(draws)]
    ctx.at_least("cone_supported_min_H", min(values), 0.0)

    control_lat = build_mode_lattice(1.0, 2, NO_FILTER)
    control = HamiltonianSystem(Domain(control_lat, SpacetimeGrid.spatial(1, 8, 2 * np.pi)))
    idx = control_lat.index[(1, 2, 0, 0)]
    ctx.at_most("control_mode_eigenvalue_error",
                abs(control.kinetics[1][idx] + 3.0), 1e-12)
    ctx.below("spacelike_control_H", control.hamiltonian(spacelike_control_state(control)), 0.0)


def matter_suite(ctx: SuiteContext) -> None:
    lat = build_mode_lattice(1.0, 2)
    L3 = 2 * np.pi
    grid = SpacetimeGrid.spatial(1, 64, L3)
    dom = Domain(lat, grid)
    rng = _rng(ctx, 9)
    x = grid.coordinates(3)
    envelope = np.exp(-((x - np.pi) ** 2) / (2 * 0.5**2)) * np.cos(4 * x)
    amp = rng.standard_normal(lat.size) + 1j * rng.standard_normal(lat.size)
    psi = symmetrize_reality(lat, envelope[..., None] * amp)
    amp2 = rng.standard_normal(lat.size) + 1j * rng.standard_normal(lat.size)
    psi_dot = -0.5 * grid.derivative(psi, 3) + symmetrize_reality(lat, envelope[..., None] * amp2)
    _, P0 = matter_probe_current(dom, psi, psi_dot)
    psi_t, dot_t = evolve_free_scalar(dom, psi, psi_dot, 10 * L3)
    _, P1 = matter_probe_current(dom, psi_t, dot_t)
    ctx.at_most("matter_charge_drift", float(np.max(np.abs(P1 - P0))) / float(np.max(np.abs(P0))), 1e-8)

    eps = _random_vector(rng, lat, grid, band=None)
    integral, magnitude = matter_variation_integral(dom, psi, psi_dot, eps)
    ctx.at_most("matter_variation_integral", float(np.max(np.abs(integral))) / magnitude, 1e-12)


def determinism_suite(ctx: SuiteContext) -> None:
    from .harness import load_config_text, run_evolution, write_outputs

    text = "\n".join([
        "grid.d = 1", "grid.n = 8", "grid.steps = 20", "lattice.radius = 2",
        "init.kind = random-cone", "init.amplitude = 0.2", f"run.seed = {ctx.seed}",
    ])
    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in range(2):
            cfg = load_config_text(text, overrides=[
                f"output.csv={Path(tmp) / f'run{run}.csv'}",
                f"output.json={Path(tmp) / f'run{run}.json'}",
            ])
            report = run_evolution(cfg)
            write_outputs(report, cfg)
            digests.append(tuple(hashlib.sha256(Path(p).read_bytes()).hexdigest()
                                 for p in (cfg.get("output.csv"), cfg.get("output.json"))))
    ctx.at_most("repeat_run_hash_mismatches", sum(a != b for a, b in zip(*digests)), 0.0)


def zero_field_suite(ctx: SuiteContext) -> None:
    lat = build_mode_lattice(1.0, 2)
    sys = HamiltonianSystem(Domain(lat, SpacetimeGrid.spatial(1, 8, 2 * np.pi)))
    state = zero_state(sys)
    ctx.at_most("zero_H", abs(sys.hamiltonian(state)), 0.0)
    ctx.at_most("zero_momentum", float(np.max(np.abs(sys.momentum(state)))), 0.0)
    dA, dP = sys.time_derivatives(state)
    ctx.at_most("zero_time_derivative", float(np.max(np.abs(dA)) + np.max(np.abs(dP))), 0.0)
    ctx.at_most("zero_gauss", sys.gauss_residual(state), 0.0)


SUITES: dict[str, Callable[[SuiteContext], None]] = {
    "regulator": regulator_suite,
    "algebra": algebra_suite,
    "kinematics": kinematics_suite,
    "constraint": constraint_suite,
    "gradient": gradient_suite,
    "maxwell": maxwell_suite,
    "conservation": conservation_suite,
    "positivity": positivity_suite,
    "matter": matter_suite,
    "determinism": determinism_suite,
    "zero-field": zero_field_suite,
}


CHECK_NAMES: dict[str, tuple[str, ...]] = {
    "regulator": ("omega1_reference_rel_error", "omega1_reference_mc_sigma",
                  "omega1_quadrature_mc_sigma"),
    "algebra": ("bracket_divergence", "bracket_antisymmetry", "jacobi_retained_triples",
                "nabla_antihermitian"),
    "kinematics": ("field_strength_divergence", "gauge_variation_divergence",
                   "gauge_covariance_slope_error", "bianchi", "scale_invariance"),
    "constraint": ("gauss_after_solve", "reconstruct_divergence", "hamiltonian_two_route",
                   "kinetic_eigenvalues", "kinetic_worked_case"),
    "gradient": ("gradient_fd_rel_error",),
    "maxwell": ("maxwell_field_equation", "maxwell_dispersion_rel_error", "maxwell_energy_drift",
                "rk4_order_slope_error"),
    "conservation": ("nonlinear_H_drift", "nonlinear_p3_drift", "nonlinear_gauss_max",
                     "nonlinear_divergence_max", "stress_divergence_over_local_tolerance",
                     "H_equals_p0"),
    "positivity": ("cone_supported_min_H", "control_mode_eigenvalue_error", "spacelike_control_H"),
    "matter": ("matter_charge_drift", "matter_variation_integral"),
    "determinism": ("repeat_run_hash_mismatches",),
    "zero-field": ("zero_H", "zero_momentum", "zero_time_derivative", "zero_gauss"),
}


def run_suite(name: str, seed: int = 0, tolerances: Mapping[str, float] | None = None
              ) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    ctx = SuiteContext(seed=seed, tolerances=dict(tolerances or {}))
    SUITES[name](ctx)
    names = [c.name for c in ctx.checks]
    if names != list(CHECK_NAMES[name]):
        raise RuntimeError(f"suite {name!r} produced checks {names}, expected {CHECK_NAMES[name]}")
    return ctx.checks
