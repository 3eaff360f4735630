"""Run configuration: TOML ingestion, validation, canonical serialization.

Configs are plain TOML with sections (robot geometry, scenario, sweep
grids, solver knobs, output).  Two canonical files ship with the package
(``go1.toml`` for the quadruped stance tests, ``pointmass.toml`` for the
trajectory tests); ``load_config`` resolves bare names against them so
``--config go1.toml`` works from anywhere.  ``dumps_config`` emits a
canonical form whose parse/serialize round trip is stable.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .model import Contact, StanceConfig


class ConfigError(ValueError):
    """Bad configuration; message carries the offending section/field."""


@dataclass(frozen=True)
class RobotCfg:
    mass: float = 12.0
    mu: float = 0.6
    lx: float = 0.188
    ly: float = 0.127
    height: float = 0.27
    gravity: float = 9.81

    def validate(self) -> None:
        for name in ("mass", "mu", "lx", "ly", "height", "gravity"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"robot.{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class ScenarioCfg:
    sway_amp_x: float = 0.05
    sway_freq_x: float = 0.22
    sway_amp_y: float = 0.08
    sway_freq_y: float = 0.30
    duration: float = 10.0 / 3.0
    sample_rate: float = 60.0

    def validate(self) -> None:
        if self.sway_amp_x < 0 or self.sway_amp_y < 0:
            raise ConfigError("scenario amplitudes must be non-negative")
        for name in ("sway_freq_x", "sway_freq_y", "duration", "sample_rate"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"scenario.{name} must be positive")


@dataclass(frozen=True)
class OcpCfg:
    horizon: float = 3.0
    knots: int = 60
    beta: float = 1.0
    gamma: float = 1.0
    orbit_offset: float = 0.05
    test_e_beta: float = 1000.0

    def validate(self) -> None:
        if self.horizon <= 0 or self.knots < 2:
            raise ConfigError("ocp.horizon must be positive and ocp.knots >= 2")
        if self.beta < 0 or self.gamma <= 0:
            raise ConfigError("ocp weights need beta >= 0 and gamma > 0")
        if self.orbit_offset <= 0:
            raise ConfigError("ocp.orbit_offset must be positive")


@dataclass(frozen=True)
class SweepCfg:
    alpha_grid: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
    alpha_grid_extended: tuple[float, ...] = (
        1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0,
        1000.0, 2000.0, 5000.0, 1e4, 2e4, 5e4, 1e5,
    )
    test_e_alpha_grid: tuple[float, ...] = (5.0, 20.0, 100.0, 500.0, 1000.0)
    fit_alpha_min: float = 100.0
    directions: int = 7
    accel_mag: float = 1.0
    kink_min: float = 2.0
    kink_max: float = 5.5
    kink_step: float = 0.25
    kink_fine_halfwidth: float = 0.3
    kink_fine_step: float = 0.02
    mu_min: float = 0.4
    mu_max: float = 1.0
    mu_step: float = 0.05
    mu_sweep_accel: float = 1.0
    prefactor_alpha: float = 10.0
    prefactor_points: int = 13
    task_moment: tuple[float, float, float] = (0.3, -0.2, 0.15)

    def validate(self) -> None:
        for name in ("alpha_grid", "alpha_grid_extended", "test_e_alpha_grid"):
            grid = getattr(self, name)
            if len(grid) < 2 or any(a <= 0 for a in grid):
                raise ConfigError(f"sweep.{name} needs >= 2 positive entries")
            if list(grid) != sorted(grid):
                raise ConfigError(f"sweep.{name} must be sorted ascending")
        if self.directions < 1:
            raise ConfigError("sweep.directions must be >= 1")
        if self.kink_min >= self.kink_max or self.kink_step <= 0 or self.kink_fine_step <= 0:
            raise ConfigError("sweep kink grid is malformed")
        if self.mu_min >= self.mu_max or self.mu_step <= 0:
            raise ConfigError("sweep mu grid is malformed")
        if self.prefactor_points < 4:
            raise ConfigError("sweep.prefactor_points must be >= 4")


@dataclass(frozen=True)
class SolverCfg:
    tol: float = 1e-10
    max_iter: int = 100_000
    cone_model: str = "soc"
    ocp_tol: float = 1e-8
    bc_tol: float = 1e-6

    def validate(self) -> None:
        if self.tol <= 0 or self.ocp_tol <= 0 or self.bc_tol <= 0:
            raise ConfigError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ConfigError("solver.max_iter must be >= 1")
        if self.cone_model not in ("soc", "pyramid8"):
            raise ConfigError(f"solver.cone_model must be soc|pyramid8, got {self.cone_model!r}")


@dataclass(frozen=True)
class OutputCfg:
    dir: str = "runs"
    seed: int = 20240811

    def validate(self) -> None:
        if not self.dir:
            raise ConfigError("output.dir must be non-empty")


@dataclass(frozen=True)
class RunConfig:
    robot: RobotCfg = field(default_factory=RobotCfg)
    scenario: ScenarioCfg = field(default_factory=ScenarioCfg)
    ocp: OcpCfg = field(default_factory=OcpCfg)
    sweep: SweepCfg = field(default_factory=SweepCfg)
    solver: SolverCfg = field(default_factory=SolverCfg)
    output: OutputCfg = field(default_factory=OutputCfg)
    reference: dict = field(default_factory=dict)

    def validate(self) -> None:
        for section in (self.robot, self.scenario, self.ocp, self.sweep, self.solver, self.output):
            section.validate()
        for key, val in self.reference.items():
            if not isinstance(val, (int, float)):
                raise ConfigError(f"reference.{key} must be numeric")

    # -- stance builders --------------------------------------------------------

    def rectangle_stance(self) -> StanceConfig:
        r = self.robot
        feet = [(r.lx, -r.ly), (r.lx, r.ly), (-r.lx, -r.ly), (-r.lx, r.ly)]
        contacts = tuple(Contact((x, y, 0.0), r.mu) for x, y in feet)
        return StanceConfig(contacts, r.mass, r.gravity)

    def trot_stance(self) -> StanceConfig:
        r = self.robot
        contacts = (
            Contact((r.lx, -r.ly, 0.0), r.mu),  # front-right
            Contact((-r.lx, r.ly, 0.0), r.mu),  # rear-left
        )
        return StanceConfig(contacts, r.mass, r.gravity)

    def com(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.robot.height])


_SECTIONS = {
    "robot": RobotCfg,
    "scenario": ScenarioCfg,
    "ocp": OcpCfg,
    "sweep": SweepCfg,
    "solver": SolverCfg,
    "output": OutputCfg,
}


def _coerce(cls, section: str, data: dict):
    valid = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, val in data.items():
        if key not in valid:
            raise ConfigError(f"unknown key {section}.{key}")
        default = getattr(cls(), key)
        if isinstance(default, tuple):
            if not isinstance(val, list):
                raise ConfigError(f"{section}.{key} must be a list")
            kwargs[key] = tuple(float(v) for v in val)
        elif isinstance(default, bool):
            kwargs[key] = bool(val)
        elif isinstance(default, int) and not isinstance(val, bool):
            if isinstance(val, float) and not val.is_integer():
                raise ConfigError(f"{section}.{key} must be an integer")
            kwargs[key] = int(val)
        elif isinstance(default, float):
            kwargs[key] = float(val)
        elif isinstance(default, str):
            kwargs[key] = str(val)
        else:
            kwargs[key] = val
    return cls(**kwargs)


def packaged_config_path(name: str) -> Path | None:
    base = importlib.resources.files("pendular_lab").joinpath("data", name)
    try:
        if base.is_file():
            return Path(str(base))
    except (OSError, AttributeError):
        return None
    return None


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a config; bare names resolve to packaged defaults."""
    p = Path(path)
    if not p.exists():
        packaged = packaged_config_path(p.name) if p.name == str(path) else None
        if packaged is None:
            raise ConfigError(f"config file not found: {path}")
        p = packaged
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {p}: {exc}") from exc

    kwargs = {}
    for section, payload in raw.items():
        if section == "reference":
            if not isinstance(payload, dict):
                raise ConfigError("reference must be a table")
            kwargs["reference"] = dict(payload)
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(payload, dict):
            raise ConfigError(f"section [{section}] must be a table")
        kwargs[section] = _coerce(_SECTIONS[section], section, payload)
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float):
        return format(val, ".17g")
    if isinstance(val, str):
        return f'"{val}"'
    if isinstance(val, (tuple, list)):
        return "[" + ", ".join(_format_value(v) for v in val) + "]"
    raise ConfigError(f"cannot serialize {val!r}")


def dumps_config(cfg: RunConfig) -> str:
    """Canonical TOML text; parsing it back reproduces the config exactly."""
    lines: list[str] = []
    for section, cls in _SECTIONS.items():
        block = getattr(cfg, section)
        lines.append(f"[{section}]")
        for f in fields(cls):
            lines.append(f"{f.name} = {_format_value(getattr(block, f.name))}")
        lines.append("")
    if cfg.reference:
        lines.append("[reference]")
        for key in sorted(cfg.reference):
            lines.append(f"{key} = {_format_value(cfg.reference[key])}")
        lines.append("")
    return "\n".join(lines)
