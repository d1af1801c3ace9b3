"""Scenario files: flat `key = value` text with dotted sections.

Unknown keys are rejected with the offending line number; values are
type-checked against the schema below.  Comma-separated values load as
per-axis tuples.  `madflow validate` prints the resolved config without
running anything.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grids import DIRICHLET, PERIODIC, Grid, MassMatrix, WaveField
from .potentials import PotentialSpec
from . import states
from .dynamics import (CRANK_NICOLSON, PRE_SCHRODINGER, SCHRODINGER,
                       SPLIT_STEP, EvolutionConfig)

ANALYSES = ("equivariance", "fokker-planck", "hj-residuals", "caustic",
            "equivalence", "wallstrom", "measurement", "product-rule",
            "splitting", "energy-balance", "mean-acceleration")

_FLOAT = "float"
_FLOATS = "floats"
_INT = "int"
_INTS = "ints"
_STR = "str"
_STRS = "strs"

_STATE_KEYS = {
    "kind": (_STR, None),
    "center": (_FLOATS, (0.0,)),
    "width": (_FLOATS, (1.0,)),
    "momentum": (_FLOATS, (0.0,)),
    "k": (_FLOATS, (1.0,)),
    "index": (_INT, 0),
    "m": (_INT, 1),
    "phase": (_STR, "none"),          # none | quadratic | log-cosh
    "phase_scale": (_FLOAT, 1.0),
    "weight_re": (_FLOAT, 1.0),
    "weight_im": (_FLOAT, 0.0),
}

SCHEMA: dict[str, tuple[str, object]] = {
    "name": (_STR, None),
    "seed": (_INT, 0),
    "engine": (_STR, "none"),
    "integrator": (_STR, SPLIT_STEP),
    "dt": (_FLOAT, 1e-3),
    "t_final": (_FLOAT, 0.0),
    "snapshot_stride": (_INT, 1),
    "hbar": (_FLOAT, 1.0),
    "mass": (_FLOATS, (1.0,)),
    "eps_node": (_FLOAT, 1e-12),
    "grid.dim": (_INT, 1),
    "grid.lo": (_FLOATS, (-8.0,)),
    "grid.hi": (_FLOATS, (8.0,)),
    "grid.n": (_INTS, (512,)),
    "grid.boundary": (_STR, PERIODIC),
    "potential.kind": (_STR, "free"),
    "potential.omega": (_FLOATS, (1.0,)),
    "potential.height": (_FLOAT, 1.0),
    "potential.width": (_FLOAT, 1.0),
    "potential.a": (_FLOAT, 1.0),
    "potential.b": (_FLOAT, 1.0),
    "interaction.kind": (_STR, "none"),
    "interaction.g": (_FLOAT, 0.0),
    "interaction.t_on": (_FLOAT, 0.0),
    "interaction.t_off": (_FLOAT, 0.0),
    "trajectories.kind": (_STR, "none"),
    "trajectories.walkers": (_INT, 0),
    "trajectories.seed": (_INT, -1),
    "trajectories.dt_sde": (_FLOAT, 1e-3),
    "trajectories.starts": (_FLOATS, ()),
    "analyses": (_STRS, ()),
    "equivariance.bins": (_INT, 16),
    "equivariance.checkpoints": (_INT, 5),
    "equivariance.threshold": (_FLOAT, 0.05),
    "fokker-planck.bandwidth_frac": (_FLOAT, 0.25),
    "fokker-planck.floor": (_FLOAT, 0.05),
    "fokker-planck.coarse_n": (_INT, 64),
    "fokker-planck.threshold": (_FLOAT, 0.1),
    "hj-residuals.modes": (_STRS, ("quantum-hj", "continuity")),
    "hj-residuals.k": (_INT, 1),
    "hj-residuals.support_floor": (_FLOAT, 1e-6),
    "hj-residuals.threshold": (_FLOAT, 1e-2),
    "caustic.j_min": (_FLOAT, 1e-3),
    "caustic.blowup_factor": (_FLOAT, 1e3),
    "caustic.horizon": (_FLOAT, 0.0),     # 0 => t_final
    "caustic.expect": (_FLOAT, float("nan")),
    "caustic.tol": (_FLOAT, 0.02),
    "equivalence.start": (_FLOATS, (0.0,)),
    "equivalence.threshold_frac": (_FLOAT, 1e-4),
    "wallstrom.radii": (_FLOATS, ()),
    "wallstrom.k_points": (_INT, 256),
    "wallstrom.quantization_tol": (_FLOAT, 1e-3),
    "wallstrom.fit_rlo": (_FLOAT, 0.0),   # 0 => 10 h
    "wallstrom.fit_rhi": (_FLOAT, 0.0),   # 0 => 0.45 * state width
    "wallstrom.alpha_tol": (_FLOAT, 0.05),
    "measurement.separation_widths": (_FLOAT, 6.0),
    "measurement.residual_tol": (_FLOAT, 1e-3),
    "measurement.walkers": (_INT, 0),
    "measurement.freq_sigmas": (_FLOAT, 3.0),
    "product-rule.threshold": (_FLOAT, 1e-6),
    "splitting.threshold": (_FLOAT, 1e-8),
    "energy-balance.energy": (_FLOAT, 0.0),
    "energy-balance.threshold": (_FLOAT, 1e-4),
    "mean-acceleration.k": (_INT, 1),
    "mean-acceleration.support_floor": (_FLOAT, 1e-6),
    "mean-acceleration.threshold": (_FLOAT, 1e-2),
}

_STATE_PREFIX = re.compile(r"^state\.(?:(?:term\d+|system|env)\.)*(\w+)$")


def _parse_value(kind: str, raw: str, key: str, line_no: int):
    raw = raw.strip()
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            return int(raw)
        if kind == _STR:
            return raw
        if kind == _FLOATS:
            return tuple(float(v) for v in raw.split(",") if v.strip() != "")
        if kind == _INTS:
            return tuple(int(v) for v in raw.split(",") if v.strip() != "")
        if kind == _STRS:
            return tuple(v.strip() for v in raw.split(",") if v.strip() != "")
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}' expects {kind}, got {raw!r}")
    raise ConfigError(f"internal: unknown kind {kind}")


def parse_config(text: str, overrides: list[str] | None = None) -> dict:
    """Parse config text into a flat dict, applying key=value overrides last."""
    values: dict[str, object] = {}
    lines = list(enumerate(text.splitlines(), start=1))
    for extra in overrides or []:
        if "=" not in extra:
            raise ConfigError(f"override {extra!r} is not of the form key=value")
        lines.append((0, extra))
    for line_no, line in lines:
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        state_m = _STATE_PREFIX.match(key)
        if key in SCHEMA:
            kind = SCHEMA[key][0]
        elif state_m and state_m.group(1) in _STATE_KEYS:
            kind = _STATE_KEYS[state_m.group(1)][0]
        elif key == "state.terms" or key.endswith(".terms"):
            kind = _INT
        else:
            where = f"line {line_no}: " if line_no else "override: "
            raise ConfigError(f"{where}unknown key '{key}'")
        values[key] = _parse_value(kind, raw, key, line_no)
    if "name" not in values:
        raise ConfigError("missing required key 'name'")
    return values


def resolved(values: dict) -> dict:
    """Full config with schema defaults filled in (state.* kept as given)."""
    out = {k: v for k, v in values.items()}
    for key, (_, default) in SCHEMA.items():
        if key not in out and default is not None:
            out[key] = default
    return out


def _per_axis(value, dim, key):
    t = tuple(value)
    if len(t) == 1:
        return t * dim
    if len(t) != dim:
        raise ConfigError(f"'{key}' needs 1 or {dim} values, got {len(t)}")
    return t


@dataclass
class Scenario:
    name: str
    seed: int
    values: dict
    grid: Grid
    mass: MassMatrix
    potential: PotentialSpec
    engine: str
    cfg: EvolutionConfig | None
    psi0: WaveField | None
    analyses: tuple[str, ...]

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        if key in SCHEMA:
            return SCHEMA[key][1]
        raise KeyError(key)


def _build_state(prefix: str, values: dict, grid: Grid, mass: MassMatrix,
                 hbar: float, potential: PotentialSpec) -> WaveField:
    def g(name, default=None):
        full = f"{prefix}.{name}" if prefix else f"state.{name}"
        if full in values:
            return values[full]
        if default is not None:
            return default
        return _STATE_KEYS[name][1]

    kind = g("kind")
    if kind is None:
        raise ConfigError(f"missing '{prefix or 'state'}.kind'")
    dim = grid.dim
    if kind == "gaussian":
        return states.gaussian(grid, _per_axis(g("center"), dim, "center"),
                               _per_axis(g("width"), dim, "width"),
                               _per_axis(g("momentum"), dim, "momentum"), hbar)
    if kind == "plane-wave":
        return states.plane_wave(grid, _per_axis(g("k"), dim, "k"))
    if kind == "eigenstate":
        if potential.kind != "harmonic":
            raise ConfigError("eigenstate states need potential.kind = harmonic")
        return states.harmonic_eigenstate(grid, g("index"), potential.omega[0],
                                          mass, hbar)
    if kind == "vortex":
        if dim != 2:
            raise ConfigError("vortex states need grid.dim = 2")
        return states.vortex(grid, g("m"), g("width")[0])
    if kind == "superposition":
        base = prefix or "state"
        n_terms = values.get(f"{base}.terms", values.get("state.terms"))
        if not n_terms:
            raise ConfigError(f"superposition needs {base}.terms")
        terms = []
        for i in range(1, int(n_terms) + 1):
            w = complex(values.get(f"{base}.term{i}.weight_re", 1.0),
                        values.get(f"{base}.term{i}.weight_im", 0.0))
            terms.append((w, _build_state(f"{base}.term{i}", values, grid, mass,
                                          hbar, potential)))
        return states.superposition(terms)
    raise ConfigError(f"unknown state.kind {kind!r}")


def _apply_phase(psi: WaveField, values: dict) -> WaveField:
    phase = values.get("state.phase", "none")
    scale = values.get("state.phase_scale", 1.0)
    if phase == "none":
        return psi
    if psi.grid.dim != 1:
        raise ConfigError("state.phase profiles are 1D")
    if phase == "quadratic":
        return states.with_phase(psi, lambda x: -scale * x**2 / 2)
    if phase == "log-cosh":
        return states.with_phase(psi, lambda x: -scale * np.log(np.cosh(x)))
    raise ConfigError(f"unknown state.phase {phase!r}")


def build_scenario(values: dict) -> Scenario:
    values = resolved(values)
    dim = values["grid.dim"]
    if dim not in (1, 2):
        raise ConfigError("grid.dim must be 1 or 2")
    grid = Grid(_per_axis(values["grid.lo"], dim, "grid.lo"),
                _per_axis(values["grid.hi"], dim, "grid.hi"),
                _per_axis(values["grid.n"], dim, "grid.n"),
                values["grid.boundary"])
    mass = MassMatrix(_per_axis(values["mass"], dim, "mass"))
    pot_kind = values["potential.kind"]
    potential = PotentialSpec(
        kind=pot_kind,
        omega=_per_axis(values["potential.omega"], dim, "potential.omega"),
        height=values["potential.height"], width=values["potential.width"],
        a=values["potential.a"], b=values["potential.b"], mass=mass)

    engine = values["engine"]
    cfg = None
    if engine != "none":
        if engine not in (SCHRODINGER, PRE_SCHRODINGER):
            raise ConfigError(f"unknown engine {engine!r}")
        integrator = values["integrator"]
        if integrator == SPLIT_STEP and not grid.periodic:
            raise ConfigError("split-step requires grid.boundary = periodic")
        if integrator == CRANK_NICOLSON and grid.dim == 2 and grid.periodic:
            raise ConfigError("crank-nicolson on 2D periodic grids is not "
                              "supported; use split-step")
        cfg = EvolutionConfig(dt=values["dt"], t_final=values["t_final"],
                              mass=mass, engine=engine, integrator=integrator,
                              hbar=values["hbar"],
                              snapshot_stride=values["snapshot_stride"],
                              eps_node_rel=values["eps_node"])

    for an in values["analyses"]:
        if an not in ANALYSES:
            raise ConfigError(f"unknown analysis {an!r}; known: {', '.join(ANALYSES)}")
    _validate_cross(values, grid, engine)

    psi0 = None
    if values.get("state.kind") == "bipartite":
        psi0 = _build_bipartite_state(values, grid, mass)
    elif "state.kind" in values:
        psi0 = _apply_phase(
            _build_state("state", values, grid, mass, values["hbar"], potential),
            values)
    return Scenario(values["name"], values["seed"], values, grid, mass,
                    potential, engine, cfg, psi0, tuple(values["analyses"]))


def _build_bipartite_state(values: dict, grid: Grid, mass: MassMatrix) -> WaveField:
    if grid.dim != 2:
        raise ConfigError("bipartite states need grid.dim = 2")
    hbar = values["hbar"]
    g_s = Grid((grid.lo[0],), (grid.hi[0],), (grid.n[0],), grid.boundary)
    g_e = Grid((grid.lo[1],), (grid.hi[1],), (grid.n[1],), grid.boundary)
    m_s = MassMatrix((mass.inv_diag[0],))
    m_e = MassMatrix((mass.inv_diag[1],))
    sys_state = _build_state("state.system", values, g_s, m_s, hbar,
                             PotentialSpec(kind="free"))
    env_state = _build_state("state.env", values, g_e, m_e, hbar,
                             PotentialSpec(kind="free"))
    vals = np.outer(sys_state.values, env_state.values)
    return WaveField(grid, vals).normalize()


def bipartite_branches(values: dict, grid: Grid) -> tuple[np.ndarray, np.ndarray,
                                                          tuple[complex, complex]]:
    """Branch states phi_1, phi_2 on the system axis of a bipartite scenario."""
    if values.get("state.system.kind") != "superposition":
        raise ConfigError("measurement needs state.system.kind = superposition")
    n_terms = int(values.get("state.terms", 0) or values.get("state.system.terms", 2))
    if n_terms != 2:
        raise ConfigError("measurement needs exactly two system branches")
    g_s = Grid((grid.lo[0],), (grid.hi[0],), (grid.n[0],), grid.boundary)
    phis = []
    weights = []
    for i in (1, 2):
        pre = f"state.system.term{i}"
        w = complex(values.get(f"{pre}.weight_re", 1.0),
                    values.get(f"{pre}.weight_im", 0.0))
        phi = states.gaussian(g_s, values.get(f"{pre}.center", (0.0,)),
                              values.get(f"{pre}.width", (1.0,)),
                              values.get(f"{pre}.momentum", (0.0,)),
                              values["hbar"])
        phis.append(phi.values)
        weights.append(w)
    return phis[0], phis[1], (weights[0], weights[1])


def _validate_cross(values: dict, grid: Grid, engine: str):
    an = values["analyses"]
    dim = grid.dim

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    if "wallstrom" in an:
        need(dim == 2, "wallstrom requires dim=2")
    if "measurement" in an:
        need(dim == 2, "measurement requires dim=2")
        need(values.get("state.kind") == "bipartite",
             "measurement requires state.kind = bipartite")
        need(values["interaction.kind"] == "measurement-coupling",
             "measurement requires interaction.kind = measurement-coupling")
    if "equivariance" in an or "fokker-planck" in an:
        need(dim == 1, "walker-statistics analyses are 1D")
        need(values["trajectories.kind"] in ("bohmian", "nelsonian"),
             "equivariance/fokker-planck need trajectories.kind set")
        need(values["trajectories.walkers"] >= 1, "trajectories.walkers must be >= 1")
    if "fokker-planck" in an:
        need(values["trajectories.kind"] == "nelsonian",
             "fokker-planck requires nelsonian trajectories")
    if ("caustic" in an) or ("equivalence" in an):
        need(engine == PRE_SCHRODINGER,
             "caustic/equivalence analyses need engine = pre-schrodinger")
    if ("hj-residuals" in an) or ("mean-acceleration" in an) or ("equivariance" in an):
        need(engine != "none", "this analysis needs an evolution engine")
    if ("product-rule" in an) or ("splitting" in an):
        need(values.get("state.kind") == "bipartite" and dim == 2,
             "product-rule/splitting need a bipartite state on a 2D grid")
    if "state.kind" in values and values["state.kind"] == "superposition":
        need("state.terms" in values, "superposition needs state.terms")


def echo(values: dict) -> str:
    values = resolved(values)
    keys = sorted(values)
    lines = []
    for k in keys:
        v = values[k]
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines)
