"""Experiment configuration: JSON-loadable spec with auto modes, resolved to
concrete numbers before any run. Resolved values are what the manifest records.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import InvalidParameterError
from .graph import CirculantGraph, connectance, new_circulant
from .integrator import SCHEME_WEAK2, SCHEMES, default_dt
from .model import AnnealSchedule, PhysicalParams

H0_MODE_AUTO = "auto_2r"
DT_MODE_AUTO = "auto"

CONFIG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GraphSpec:
    n: int = 101
    r: int = 1


@dataclass(frozen=True)
class ScheduleSpec:
    j0: float = 1.0
    h0_mode: str = H0_MODE_AUTO  # "auto_2r" or an explicit number via h0
    h0: float | None = None
    tau_q: float = 40.0


@dataclass(frozen=True)
class PhysicsSpec:
    mass: float = 1.0
    gamma: float = 0.1
    temperature: float = 0.001


@dataclass(frozen=True)
class IntegrationSpec:
    dt_mode: str = DT_MODE_AUTO  # "auto" or "explicit" with dt set
    dt: float | None = None
    scheme: str = SCHEME_WEAK2
    n_samples: int = 0           # 0: finals only; k: k+1 uniform instants incl. 0 and tau_q
    sample_times: tuple[float, ...] = ()  # explicit extra instants


@dataclass(frozen=True)
class EnsembleSpec:
    n_trajectories: int = 100
    base_seed: int = 0
    max_parallelism: int = 0     # 0: resolve from env / cpu count
    batch_size: int = 256


@dataclass(frozen=True)
class OutputSpec:
    record_finals: bool = True
    record_series: bool = False
    correlator_eps: tuple[float, ...] = ()  # requested eps/(2r) values, pre-critical
    d_max: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphSpec = field(default_factory=GraphSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    physics: PhysicsSpec = field(default_factory=PhysicsSpec)
    integration: IntegrationSpec = field(default_factory=IntegrationSpec)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        def build(spec_cls, key):
            sub = dict(data.get(key, {}))
            known = set(spec_cls.__dataclass_fields__)
            unknown = set(sub) - known
            if unknown:
                raise InvalidParameterError(f"unknown {key} config fields: {sorted(unknown)}")
            for name in ("sample_times", "correlator_eps"):
                if name in sub and sub[name] is not None:
                    sub[name] = tuple(sub[name])
            return spec_cls(**sub)

        unknown_top = set(data) - {"graph", "schedule", "physics", "integration", "ensemble", "outputs"}
        if unknown_top:
            raise InvalidParameterError(f"unknown config sections: {sorted(unknown_top)}")
        return cls(
            graph=build(GraphSpec, "graph"),
            schedule=build(ScheduleSpec, "schedule"),
            physics=build(PhysicsSpec, "physics"),
            integration=build(IntegrationSpec, "integration"),
            ensemble=build(EnsembleSpec, "ensemble"),
            outputs=build(OutputSpec, "outputs"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, delta: dict[str, Any]) -> "ExperimentConfig":
        """Deep-merge a partial nested dict over this config."""
        base = self.to_dict()
        for section, sub in delta.items():
            if section not in base:
                raise InvalidParameterError(f"unknown config section {section!r}")
            if not isinstance(sub, dict):
                raise InvalidParameterError(f"override for {section!r} must be a mapping")
            base[section].update(sub)
        return ExperimentConfig.from_dict(base)


@dataclass(frozen=True)
class ResolvedConfig:
    """All auto modes resolved; the unit of reproducibility."""

    n: int
    r: int
    j0: float
    h0: float
    tau_q: float
    mass: float
    gamma: float
    temperature: float
    dt: float
    scheme: str
    sample_times: tuple[float, ...]
    n_trajectories: int
    base_seed: int
    max_parallelism: int
    batch_size: int
    record_series: bool
    correlator_eps: tuple[float, ...]
    correlator_times: tuple[float, ...]
    d_max: int | None

    def graph_obj(self) -> CirculantGraph:
        return new_circulant(self.n, self.r)

    def schedule_obj(self) -> AnnealSchedule:
        return AnnealSchedule(j0=self.j0, h0=self.h0, tau_q=self.tau_q)

    def params_obj(self) -> PhysicalParams:
        return PhysicalParams(mass=self.mass, damping=self.gamma, temperature=self.temperature)

    @property
    def connectance(self) -> float:
        return connectance(self.graph_obj())

    def fingerprint(self) -> str:
        """Hash of the reproducibility-relevant knobs."""
        payload = {
            "n": self.n, "r": self.r, "tau_q": self.tau_q, "gamma": self.gamma,
            "temperature": self.temperature, "dt": self.dt, "scheme": self.scheme,
            "base_seed": self.base_seed, "j0": self.j0, "h0": self.h0, "mass": self.mass,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def resolve(cfg: ExperimentConfig) -> ResolvedConfig:
    g = new_circulant(cfg.graph.n, cfg.graph.r)

    sch = cfg.schedule
    if sch.h0_mode == H0_MODE_AUTO:
        h0 = 2.0 * g.interaction_range * sch.j0
    elif sch.h0_mode == "explicit":
        if sch.h0 is None:
            raise InvalidParameterError("h0_mode 'explicit' requires h0")
        h0 = float(sch.h0)
    else:
        raise InvalidParameterError(f"unknown h0_mode {sch.h0_mode!r}")
    schedule = AnnealSchedule(j0=sch.j0, h0=h0, tau_q=sch.tau_q)

    phys = PhysicalParams(mass=cfg.physics.mass, damping=cfg.physics.gamma,
                          temperature=cfg.physics.temperature)

    integ = cfg.integration
    if integ.dt_mode == DT_MODE_AUTO:
        dt = default_dt(phys.damping, sch.tau_q)
    elif integ.dt_mode == "explicit":
        if integ.dt is None or integ.dt <= 0:
            raise InvalidParameterError("dt_mode 'explicit' requires a positive dt")
        dt = float(integ.dt)
    else:
        raise InvalidParameterError(f"unknown dt_mode {integ.dt_mode!r}")
    if integ.scheme not in SCHEMES:
        raise InvalidParameterError(f"scheme must be one of {SCHEMES}, got {integ.scheme!r}")

    samples: set[float] = {float(sch.tau_q)}
    if integ.n_samples > 0:
        samples.update(np.linspace(0.0, sch.tau_q, integ.n_samples + 1).tolist())
    samples.update(float(t) for t in integ.sample_times)
    for t in samples:
        if not 0.0 <= t <= sch.tau_q:
            raise InvalidParameterError(f"sample time {t} outside [0, {sch.tau_q}]")

    corr_times = []
    for x in cfg.outputs.correlator_eps:
        if not 0.0 < x < 1.0:
            raise InvalidParameterError(f"correlator eps/(2r) values must lie in (0, 1), got {x}")
        corr_times.append(float(sch.tau_q * (1.0 - x) / 2.0))

    ens = cfg.ensemble
    if ens.n_trajectories < 1:
        raise InvalidParameterError("n_trajectories must be >= 1")
    if ens.batch_size < 1:
        raise InvalidParameterError("batch_size must be >= 1")

    return ResolvedConfig(
        n=g.n_vertices, r=g.interaction_range,
        j0=sch.j0, h0=h0, tau_q=float(sch.tau_q),
        mass=phys.mass, gamma=phys.damping, temperature=phys.temperature,
        dt=dt, scheme=integ.scheme,
        sample_times=tuple(sorted(samples)),
        n_trajectories=ens.n_trajectories, base_seed=ens.base_seed,
        max_parallelism=ens.max_parallelism, batch_size=ens.batch_size,
        record_series=cfg.outputs.record_series,
        correlator_eps=tuple(cfg.outputs.correlator_eps),
        correlator_times=tuple(corr_times),
        d_max=cfg.outputs.d_max,
    )
