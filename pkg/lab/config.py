"""Experiment configuration.

Configs are JSON documents (schema in data-formats.md). Every field has a
shipped default per problem and experiment; values from a file override the
defaults, and CLI flags override the file.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from obstacle_fem.biharmonic import RadialForcing, ScalarObstacle
from obstacle_fem.errors import InfeasibleReferenceError
from obstacle_fem.mesh import build_disk_mesh
from obstacle_fem.shell import (
    HalfSpaceConstraint,
    ShellLoads,
    ShellParams,
    check_reference_feasibility,
    scale_loads,
)

from .settings import OUTPUT_DIR

PROBLEMS = ("biharmonic", "shell")
EXPERIMENTS = ("kappa-sweep", "h-cauchy", "force-sweep")
FORCING_KINDS = ("radial", "radial_sweep")
LOAD_SCALINGS = ("none", "thickness_cubed")
NEWTON_CRITERIA = ("residual", "relative", "increment")

KAPPA0_PRESETS: Dict[str, Dict[int, float]] = {
    "biharmonic": {8: 1.5e-9, 16: 3.7e-10, 32: 9.3e-11, 64: 2.3e-11},
    "shell": {8: 6.0e-9, 16: 1.5e-9, 32: 3.7e-10, 64: 9.3e-11},
}
# Tight enough that the full refinement budget runs on the hex-fan disk family.
CAUCHY_TOL = {"biharmonic": 1.0e-6, "shell": 1.0e-5}
CAUCHY_MESHES = (4, 8, 16, 32, 64)
# Radial loads of the kappa and h batches, written as f = a|y|^2 + c inside |y|^2 < s.
BATCH_FORCING = {
    "biharmonic": {"kind": "radial", "a": 7.5, "c": -0.295, "s": 0.060},
    "shell": {"kind": "radial", "a": 5.0, "c": -0.295, "s": 0.060},
}
# Force-sweep loads carry a scale so contact engages at n = 16 with kappa = h^0.3.
SWEEP_FORCING = {
    "biharmonic": {"kind": "radial_sweep", "a": 0.25, "rate": 0.0059, "scale": 2000.0},
    "biharmonic_two_plane": {"kind": "radial_sweep", "a": 0.25, "rate": 0.0059, "scale": 500.0},
    "shell": {"kind": "radial_sweep", "a": 0.5, "rate": 0.0059, "scale": 100.0},
}
SWEEP_ELL = {
    "biharmonic": [0, 40, 80, 120, 160, 199],
    "biharmonic_two_plane": [0, 150, 300, 450, 600, 750],
    "shell": [0, 2, 5, 10, 20, 39],
}
# The wedge z >= |y1|/2 only contains the flat sheet over the whole disk once z0 > radius / 2.
WEDGE_Z0 = 0.3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "biharmonic"
    experiment: str = "kappa-sweep"
    n: int = 8
    radius: float = 0.5
    kappa0: Optional[float] = None
    halvings: int = 7
    q: float = 0.3
    mesh_sequence: Tuple[int, ...] = (8, 16, 32, 64)
    ell: Tuple[int, ...] = ()
    obstacle: Dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "value": -1.0})
    constraints: Tuple[Tuple[float, float, float], ...] = ((0.0, 0.0, 1.0),)
    forcing: Dict[str, Any] = field(default_factory=lambda: dict(BATCH_FORCING["biharmonic"]))
    load_scaling: str = "none"
    in_plane_load: Tuple[float, float] = (0.0, 0.0)
    first_moment: Tuple[float, float] = (0.0, 0.0)
    params: Dict[str, float] = field(default_factory=lambda: asdict(ShellParams()))
    newton_tol: float = 1e-8
    max_iter: int = 50
    newton_criterion: str = "residual"
    cauchy_tol: Optional[float] = None
    contact_tol: float = 1e-8
    warm_start: bool = False
    seed: int = 0
    output_dir: str = ""

    def __post_init__(self) -> None:
        self._validate()

    # -- validation -------------------------------------------------------

    def _validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"Unknown problem: {self.problem}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment: {self.experiment}")
        for name in ("n", "halvings", "max_iter"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.n < 1 or self.n & (self.n - 1):
            raise ConfigError(f"n must be a positive power of two, got {self.n}")
        if not self.radius > 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        if self.kappa0 is not None and not self.kappa0 > 0:
            raise ConfigError(f"kappa0 must be positive, got {self.kappa0}")
        if self.experiment == "kappa-sweep" and self.halvings < 2:
            raise ConfigError(f"kappa-sweep needs at least 2 halvings, got {self.halvings}")
        if self.experiment != "kappa-sweep" and not 0.0 < self.q < 0.5:
            raise ConfigError(f"q must lie in (0, 1/2), got {self.q}")
        seq = list(self.mesh_sequence)
        if len(seq) < 2 or any(m < 1 or m & (m - 1) for m in seq):
            raise ConfigError(f"mesh_sequence needs at least two powers of two, got {seq}")
        if any(b != 2 * a for a, b in zip(seq, seq[1:])):
            raise ConfigError(f"mesh_sequence must double at each step, got {seq}")
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in self.ell):
            raise ConfigError(f"ell values must be nonnegative integers, got {list(self.ell)}")
        if self.experiment == "force-sweep" and not self.ell:
            raise ConfigError("force-sweep needs a nonempty ell list")
        if self.load_scaling not in LOAD_SCALINGS:
            raise ConfigError(f"Unknown load_scaling: {self.load_scaling}")
        if self.newton_criterion not in NEWTON_CRITERIA:
            raise ConfigError(f"Unknown newton_criterion: {self.newton_criterion}")
        for name in ("newton_tol", "contact_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.cauchy_tol is not None and not self.cauchy_tol > 0:
            raise ConfigError("cauchy_tol must be positive")
        self.forcing_at(0)
        self.scalar_obstacle()
        if self.problem == "shell":
            params = self.shell_params()
            constraints = self.half_spaces()
            try:
                check_reference_feasibility(build_disk_mesh(1, self.radius), params, constraints)
            except InfeasibleReferenceError as exc:
                raise ConfigError(str(exc)) from exc

    # -- derived objects --------------------------------------------------

    def forcing_at(self, ell: float = 0) -> RadialForcing:
        desc = dict(self.forcing)
        kind = desc.pop("kind", "radial")
        try:
            scale = float(desc.pop("scale", 1.0))
            if not scale > 0:
                raise ValueError(f"scale must be positive, got {scale}")
            if kind == "radial":
                return RadialForcing(float(desc["a"]), float(desc["c"]), float(desc["s"])).scaled(scale)
            if kind == "radial_sweep":
                return RadialForcing.sweep(float(desc["a"]), float(desc["rate"]), float(ell)).scaled(scale)
        except KeyError as exc:
            raise ConfigError(f"forcing is missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid forcing: {exc}") from exc
        raise ConfigError(f"Only radial forcings are supported, got kind={kind!r}")

    def scalar_obstacle(self) -> ScalarObstacle:
        desc = self.obstacle
        kind = desc.get("kind", "constant")
        try:
            if kind == "constant":
                return ScalarObstacle.constant(float(desc.get("value", -1.0)))
            if kind == "two_plane":
                return ScalarObstacle.two_plane()
            if kind == "planes":
                return ScalarObstacle(tuple(tuple(p) for p in desc["planes"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid obstacle: {exc}") from exc
        raise ConfigError(f"Unknown obstacle kind: {kind!r}")

    def shell_params(self) -> ShellParams:
        try:
            return ShellParams(**{k: float(v) for k, v in self.params.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid shell params: {exc}") from exc

    def half_spaces(self) -> Tuple[HalfSpaceConstraint, ...]:
        if not self.constraints:
            raise ConfigError("At least one constraint normal is required")
        try:
            return tuple(HalfSpaceConstraint(tuple(q)) for q in self.constraints)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid constraint: {exc}") from exc

    def shell_loads(self, ell: float = 0) -> ShellLoads:
        loads = ShellLoads(
            transverse=self.forcing_at(ell),
            in_plane=tuple(self.in_plane_load),
            first_moment=tuple(self.first_moment),
        )
        if self.load_scaling == "thickness_cubed":
            return scale_loads(loads, self.shell_params().eps)
        return loads

    def resolved_kappa0(self) -> float:
        if self.kappa0 is not None:
            return float(self.kappa0)
        preset = KAPPA0_PRESETS[self.problem].get(self.n)
        if preset is None:
            raise ConfigError(f"No kappa0 preset for n={self.n}; set kappa0 explicitly")
        return preset

    def resolved_cauchy_tol(self) -> float:
        return float(self.cauchy_tol) if self.cauchy_tol is not None else CAUCHY_TOL[self.problem]

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir) if self.output_dir else OUTPUT_DIR / f"{self.problem}-{self.experiment}"

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["mesh_sequence"] = list(self.mesh_sequence)
        data["ell"] = list(self.ell)
        data["constraints"] = [list(q) for q in self.constraints]
        data["in_plane_load"] = list(self.in_plane_load)
        data["first_moment"] = list(self.first_moment)
        return data

    def content_hash(self) -> str:
        """sha256 over the canonical JSON of the fields that determine results."""
        data = self.to_dict()
        data.pop("output_dir", None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        data = self.to_dict()
        data.update(changes)
        return from_dict(data)


_TUPLE_FIELDS = {"mesh_sequence", "ell", "in_plane_load", "first_moment"}


def _field_names() -> List[str]:
    return [f.name for f in fields(ExperimentConfig)]


def from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_field_names()))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
    values = dict(data)
    try:
        for name in _TUPLE_FIELDS & set(values):
            values[name] = tuple(values[name])
        if "constraints" in values:
            values["constraints"] = tuple(tuple(float(v) for v in q) for q in values["constraints"])
        for name in ("radius", "q", "newton_tol", "contact_tol"):
            if name in values:
                values[name] = float(values[name])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Malformed config: {exc}") from exc
    return ExperimentConfig(**values)


def defaults_for(problem: str, experiment: str, *, obstacle: str = "flat") -> Dict[str, Any]:
    """Batch settings for one problem and experiment, as a config dict.

    ``obstacle`` selects ``"flat"`` (theta = -1 or q = (0, 0, 1)) or
    ``"two_plane"`` (the biharmonic roof or the shell wedge) for force sweeps.
    """
    if problem not in PROBLEMS:
        raise ConfigError(f"Unknown problem: {problem}")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment: {experiment}")
    data: Dict[str, Any] = {
        "problem": problem,
        "experiment": experiment,
        "forcing": dict(BATCH_FORCING[problem]),
    }
    if problem == "shell":
        # Scaled shell loads leave residuals far below any absolute tolerance.
        data["load_scaling"] = "thickness_cubed"
        data["newton_criterion"] = "relative"
    if experiment == "h-cauchy":
        data["mesh_sequence"] = list(CAUCHY_MESHES)
    if experiment == "force-sweep":
        data["forcing"] = dict(SWEEP_FORCING[problem])
        data["n"] = 16
        if problem == "shell":
            data["ell"] = list(SWEEP_ELL["shell"])
            if obstacle == "two_plane":
                a, b = math.sqrt(5.0) / 5.0, 2.0 * math.sqrt(5.0) / 5.0
                data["constraints"] = [[-a, 0.0, b], [a, 0.0, b]]
                data["params"] = {**asdict(ShellParams()), "z0": WEDGE_Z0}
        elif obstacle == "two_plane":
            data["obstacle"] = {"kind": "two_plane"}
            data["forcing"] = dict(SWEEP_FORCING["biharmonic_two_plane"])
            data["ell"] = list(SWEEP_ELL["biharmonic_two_plane"])
        else:
            data["ell"] = list(SWEEP_ELL["biharmonic"])
    return data


def _file_data(path: Path, experiment: Optional[str] = None) -> Dict[str, Any]:
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    problem = data.get("problem", "biharmonic")
    experiment = data.get("experiment", experiment or "kappa-sweep")
    obstacle = data.pop("preset_obstacle", "flat")
    merged = defaults_for(problem, experiment, obstacle=obstacle)
    merged.update(data)
    return merged


def load_config(path: Path) -> ExperimentConfig:
    return from_dict(_file_data(path))


def build_config(
    problem: Optional[str],
    experiment: str,
    *,
    path: Optional[Path] = None,
    obstacle: str = "flat",
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """File (or batch defaults) first, then explicit overrides, validated once."""
    if path is not None:
        data = _file_data(path, experiment)
        if problem:
            data["problem"] = problem
    else:
        data = defaults_for(problem or "biharmonic", experiment, obstacle=obstacle)
    data["experiment"] = experiment
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return from_dict(data)


def kappa_for(h: float, q: float) -> float:
    return float(h) ** float(q)


def kappa_schedule(config: ExperimentConfig) -> List[float]:
    """``2 kappa0`` followed by ``kappa0 / 2^k`` for ``k < halvings``."""
    kappa0 = config.resolved_kappa0()
    return [2.0 * kappa0] + [kappa0 / 2.0**k for k in range(config.halvings)]
