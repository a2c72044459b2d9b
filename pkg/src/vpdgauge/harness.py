"""Run configuration, evolution runs and deterministic output files.

Configs are UTF-8 text with one ``section.key = value`` per line; ``#``
starts a comment.  Every key has a typed default, unknown keys are
rejected, and ``tolerance.<check>`` overrides a check tolerance.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from . import __version__
from .hamiltonian_dynamics import (
    CANONICAL,
    FIELD_EQUATIONS,
    CanonicalState,
    EvolutionError,
    HamiltonianSystem,
    maxwell_plane_wave,
    project_gauss_zero_mode,
    random_cone_state,
    stress_divergence_rate,
    zero_state,
)
from .inner_space import FILTERS, STRICT_TIMELIKE, ConfigurationError, Domain, SpacetimeGrid, build_mode_lattice
from .lagrangian_dynamics import lagrangian_density

CSV_SCHEMA = "vpdgauge.observables/1"
JSON_SCHEMA = "vpdgauge.report/1"
CSV_COLUMNS = ("step", "t", "H", "p0", "p1", "p2", "p3", "L", "gauss_residual",
               "stress_divergence", "divfree_residual", "reality_residual", "support_leak")
INIT_KINDS = ("zero", "maxwell-plane-wave", "random-cone", "file")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _band(text: str) -> float | None:
    return None if text.strip().lower() == "none" else float(text)


def _choice(options) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return parse


def _positive(v) -> str | None:
    return None if v > 0 else "must be > 0"


def _nonnegative(v) -> str | None:
    return None if v >= 0 else "must be >= 0"


def _sizes(v) -> str | None:
    bad = [n for n in v if n < 4 or n & (n - 1)]
    return f"sizes must be powers of two >= 4, got {bad}" if bad else None


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    validate: Callable[[Any], str | None] | None = None


KEYS: dict[str, Key] = {
    "grid.d": Key(int, "1", lambda v: None if v in (1, 2, 3) else "must be 1, 2 or 3"),
    "grid.n": Key(_int_list, "16", _sizes),
    "grid.length": Key(_float_list, repr(2 * math.pi), lambda v: None if all(x > 0 for x in v) else "must be > 0"),
    "grid.dt": Key(float, "0.01", _positive),
    "grid.steps": Key(int, "100", _nonnegative),
    "grid.every": Key(int, "1", _positive),
    "lattice.kappa0": Key(float, "1.0", _positive),
    "lattice.radius": Key(int, "2", _nonnegative),
    "lattice.filter": Key(_choice(FILTERS), STRICT_TIMELIKE),
    "run.scale": Key(float, "1.0", _positive),
    "run.integrator": Key(_choice(("rk4", "midpoint")), "rk4"),
    "run.form": Key(_choice((CANONICAL, FIELD_EQUATIONS)), CANONICAL),
    "run.band": Key(_band, "0.5", lambda v: None if v is None or 0 < v <= 1 else "must be in (0, 1] or none"),
    "run.seed": Key(int, "0", _nonnegative),
    "init.kind": Key(_choice(INIT_KINDS), "zero"),
    "init.axis": Key(int, "3", lambda v: None if v == 3 else "only axis 3 is supported"),
    "init.k3": Key(int, "1", _positive),
    "init.amplitude": Key(float, "1.0", _nonnegative),
    "init.polarization": Key(_int_list, "1,1",
                             lambda v: None if len(v) == 2 and v[0] in (1, 2, 3) and v[1] in (1, 2)
                             else "must be 'alpha,i' with alpha in 1..3 and i in 1..2"),
    "init.gauss_projection": Key(_bool, "true"),
    "init.file": Key(str, ""),
    "output.csv": Key(str, "observables.csv"),
    "output.json": Key(str, "report.json"),
    "check.suite": Key(str, "zero-field"),
}


def _known_checks() -> set[str]:
    from .suites import CHECK_NAMES
    return {name for names in CHECK_NAMES.values() for name in names}


@dataclass(frozen=True)
class RunConfig:
    values: dict[str, Any]
    raw: dict[str, str]
    tolerances: dict[str, float]

    def get(self, key: str) -> Any:
        return self.values[key]

    def normalized(self, outputs: bool = True) -> str:
        """Canonical text form; reparses to an identical config.

        ``outputs=False`` drops the ``output.*`` paths, which name where a
        run is written but not what it computes.
        """
        keys = [k for k in sorted(self.raw) if outputs or not k.startswith("output.")]
        lines = [f"{k} = {self.raw[k]}" for k in keys]
        lines += [f"tolerance.{k} = {self.tolerances[k]!r}" for k in sorted(self.tolerances)]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Hash of the run-defining settings (output paths excluded)."""
        return hashlib.sha256(self.normalized(outputs=False).encode()).hexdigest()


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key in pairs:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigurationError(f"--set expects key=value, got {item!r}")
    key, value = (s.strip() for s in item.split("=", 1))
    return key, value


def build_config(pairs: dict[str, str]) -> RunConfig:
    raw = {k: key_def.default for k, key_def in KEYS.items()}
    tolerances: dict[str, float] = {}
    for key, text in pairs.items():
        if key.startswith("tolerance."):
            name = key.split(".", 1)[1]
            if name not in _known_checks():
                raise ConfigurationError(f"{key}: unknown check name")
            try:
                tol = float(text)
            except ValueError:
                raise ConfigurationError(f"{key}: not a number: {text!r}") from None
            if not tol >= 0:
                raise ConfigurationError(f"{key}: must be >= 0")
            tolerances[name] = tol
        elif key in KEYS:
            raw[key] = text
        else:
            raise ConfigurationError(f"{key}: unknown key")
    values: dict[str, Any] = {}
    for key, text in raw.items():
        key_def = KEYS[key]
        try:
            value = key_def.parse(text)
        except ValueError as exc:
            raise ConfigurationError(f"{key}: {exc}") from None
        problem = key_def.validate(value) if key_def.validate else None
        if problem:
            raise ConfigurationError(f"{key}: {problem} (got {text!r})")
        values[key] = value
    d = values["grid.d"]
    for key in ("grid.n", "grid.length"):
        if len(values[key]) not in (1, d):
            raise ConfigurationError(f"{key}: needs 1 or {d} entries")
    if values["init.kind"] == "file" and not values["init.file"]:
        raise ConfigurationError("init.file: required when init.kind = file")
    return RunConfig(values, raw, tolerances)


def load_config_text(text: str, overrides: Iterable[str] = (), source: str = "<config>") -> RunConfig:
    pairs = parse_config_text(text, source)
    for item in overrides:
        key, value = _parse_override(item)
        pairs[key] = value
    return build_config(pairs)


def load_config(path: str | Path, overrides: Iterable[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return load_config_text(text, overrides, source=str(path))


# -- runs -----------------------------------------------------------------------


@dataclass
class RunReport:
    rows: list[dict[str, float]] = field(default_factory=list)
    checks: list = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    status: str = "ok"

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(c.passed for c in self.checks)


def build_system(cfg: RunConfig) -> HamiltonianSystem:
    d = cfg.get("grid.d")
    n, length = cfg.get("grid.n"), cfg.get("grid.length")
    grid = SpacetimeGrid.spatial(d, n[0] if len(n) == 1 else n,
                                 length[0] if len(length) == 1 else length, cfg.get("grid.dt"))
    lattice = build_mode_lattice(cfg.get("lattice.kappa0"), cfg.get("lattice.radius"),
                                 cfg.get("lattice.filter"))
    return HamiltonianSystem(Domain(lattice, grid), scale=cfg.get("run.scale"),
                             form=cfg.get("run.form"), band=cfg.get("run.band"))


GAUSS_ZERO_MODE_WARNING = 1e-10


def initial_state(sys: HamiltonianSystem, cfg: RunConfig) -> CanonicalState:
    """Configured initial state; warns if the Gauss source has an unsolvable x^3-constant part."""
    state = _make_state(sys, cfg)
    _, dropped = sys.solve_A0(sys.full(state.A), sys.full(state.Pi))
    if dropped > GAUSS_ZERO_MODE_WARNING:
        warnings.warn(f"initial Gauss source has an x^3-constant part of relative size "
                      f"{dropped:.3e}; it is dropped by the A_0 solve", RuntimeWarning, stacklevel=2)
    return state


def _make_state(sys: HamiltonianSystem, cfg: RunConfig) -> CanonicalState:
    kind = cfg.get("init.kind")
    amplitude = cfg.get("init.amplitude")
    if kind == "zero":
        return zero_state(sys)
    if kind == "maxwell-plane-wave":
        alpha, i = cfg.get("init.polarization")
        return maxwell_plane_wave(sys, cfg.get("init.k3"), amplitude, (alpha, i))
    if kind == "random-cone":
        state = random_cone_state(sys, seed=cfg.get("run.seed"), amplitude=amplitude)
        if cfg.get("init.gauss_projection") and sys.grid.ndim == 1:
            state = project_gauss_zero_mode(sys, state)
        return state
    try:
        data = np.load(cfg.get("init.file"))
        A, Pi = data["A"], data["Pi"]
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigurationError(f"init.file: cannot load state ({exc})") from None
    expected = (2, 3, *sys.dom.field_shape)
    if A.shape != expected or Pi.shape != expected:
        raise ConfigurationError(f"init.file: arrays must have shape {expected}")
    return sys.clean(CanonicalState(A.astype(complex), Pi.astype(complex)))


def observables(sys: HamiltonianSystem, state: CanonicalState, step: int) -> dict[str, float]:
    p = sys.momentum(state)
    F = sys.field_strength(state)
    L = float(sys.dom.integrate(lagrangian_density(sys.dom, F, sys.scale)))
    row = {"step": step, "t": float(state.t), "H": sys.hamiltonian(state),
           "p0": p[0], "p1": p[1], "p2": p[2], "p3": p[3], "L": L}
    row.update(sys.diagnostics(state))
    row["stress_divergence"] = stress_divergence_rate(sys, state)
    return {k: (int(v) if k == "step" else float(v)) for k, v in row.items()}


def _drift(rows: list[dict[str, float]], column: str) -> float:
    vals = np.array([r[column] for r in rows])
    ref = abs(vals[0]) if vals.size and vals[0] != 0 else 1.0
    return float(np.max(np.abs(vals - vals[0])) / ref) if vals.size else 0.0


def _provenance(cfg: RunConfig) -> dict[str, Any]:
    return {"config_sha256": cfg.digest(), "seed": cfg.get("run.seed"), "version": __version__}


def run_evolution(cfg: RunConfig) -> RunReport:
    sys = build_system(cfg)
    state = initial_state(sys, cfg)
    report = RunReport(provenance=_provenance(cfg))
    record = lambda n, s: report.rows.append(observables(sys, s, n))
    try:
        sys.evolve(state, cfg.get("grid.dt"), cfg.get("grid.steps"), cfg.get("run.integrator"),
                   every=cfg.get("grid.every"), callback=record)
    except EvolutionError as exc:
        report.status = "nan-abort"
        report.summary["last_good_step"] = exc.last_good
    rows = report.rows
    report.summary.update({
        "snapshots": len(rows),
        "drift": {c: _drift(rows, c) for c in ("H", "p0", "p1", "p2", "p3")},
        "H_min": min((r["H"] for r in rows), default=0.0),
        "max_residual": {c: max((r[c] for r in rows), default=0.0)
                         for c in CSV_COLUMNS[8:]},
    })
    return report


def run_observables(cfg: RunConfig) -> RunReport:
    """Observables of the configured initial state only."""
    sys = build_system(cfg)
    state = initial_state(sys, cfg)
    report = RunReport(provenance=_provenance(cfg))
    report.rows.append(observables(sys, state, 0))
    return report


def run_check_suite(cfg: RunConfig, suite: str | None = None) -> RunReport:
    from .suites import run_suite

    name = suite or cfg.get("check.suite")
    report = RunReport(provenance=_provenance(cfg))
    try:
        report.checks = run_suite(name, seed=cfg.get("run.seed"), tolerances=cfg.tolerances)
    except KeyError as exc:
        raise ConfigurationError(str(exc.args[0])) from None
    report.summary["suite"] = name
    return report


# -- output -----------------------------------------------------------------------


def _json_number(x: float) -> float | None:
    return x if math.isfinite(x) else None


def csv_text(report: RunReport) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([row["step"]] + [repr(float(row[c])) for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


def json_text(report: RunReport, cfg: RunConfig | None = None) -> str:
    doc = {
        "schema": JSON_SCHEMA,
        "status": report.status if not report.checks else ("pass" if report.passed else "fail"),
        "provenance": report.provenance,
        "summary": report.summary,
        "checks": [{"name": c.name, "value": _json_number(c.value), "tolerance": c.tolerance,
                    "relation": c.relation, "passed": c.passed} for c in report.checks],
    }
    if cfg is not None:
        doc["config"] = {k: v for k, v in sorted(cfg.raw.items()) if not k.startswith("output.")}
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_number) + "\n"


def write_outputs(report: RunReport, cfg: RunConfig, formats: Iterable[str] = ("csv", "json")) -> None:
    targets = {"csv": (cfg.get("output.csv"), lambda: csv_text(report)),
               "json": (cfg.get("output.json"), lambda: json_text(report, cfg))}
    for fmt in formats:
        path, render = targets[fmt]
        try:
            Path(path).write_text(render(), encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {fmt} output {path}: {exc.strerror}") from exc
