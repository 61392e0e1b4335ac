"""JSON run configuration.

Unknown keys are rejected and every default is materialised in the
resolved configuration that is echoed into each artifact.
"""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .ao import AOConfig
from .phase_optimizer import LineSearchConfig


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(_Block):
    frequency_hz: float = Field(2e9, gt=0)
    N_t: int = Field(8, ge=1)
    K: int = Field(8, ge=1)
    L: int = Field(4, ge=1)
    N_x: int = Field(20, ge=1)
    N_y: int = Field(10, ge=1)
    T_SIM_wavelengths: float = Field(5.0, gt=0)
    H_BS_m: float = Field(10.0, gt=0)
    r_min_m: float = Field(60.0, gt=0)
    r_max_m: float = Field(80.0, gt=0)
    alpha: float = Field(2.5, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.r_min_m > self.r_max_m:
            raise ValueError("r_min_m must not exceed r_max_m")
        if self.K > self.N_t:
            raise ValueError("K must not exceed N_t (stream k is fed to antenna k)")
        return self


class ChannelConfig(_Block):
    kappa: Union[float, List[float]] = 1.0
    noise_figure_db: float = 0.0
    bandwidth_hz: float = Field(20e6, gt=0)
    seed: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _nonnegative(self):
        values = self.kappa if isinstance(self.kappa, list) else [self.kappa]
        if any(v < 0 for v in values):
            raise ValueError("kappa must be non-negative")
        return self


class OptimizerConfig(_Block):
    tolerance: float = Field(1e-5, gt=0)
    max_outer_iters: int = Field(130, ge=1)
    num_starts: int = Field(5, ge=1)
    phase_max_iters: int = Field(50, ge=1)
    phase_tolerance: float = Field(1e-6, gt=0)
    power_max_iters: int = Field(50, ge=1)
    power_tolerance: float = Field(1e-8, gt=0)
    initial_step: float = Field(1.0, gt=0)
    shrink: float = Field(0.5, gt=0, lt=1)
    max_backtracks: int = Field(30, ge=1)
    warm_start: bool = True
    update_mode: Literal["joint", "cyclic"] = "joint"
    P_T_dbm: float = 30.0


class ExperimentConfig(_Block):
    sweep_n_values: List[int] = [16, 36, 64]
    sweep_l_values: List[int] = [1, 2, 3, 4, 5, 6]
    drops: int = Field(20, ge=1)
    mc_samples: int = Field(100_000, ge=1)
    mc_rel_tol: float = Field(0.02, gt=0)
    grad_rel_tol: float = Field(1e-5, gt=0)
    fd_step: float = Field(1e-6, gt=0)


class OutputConfig(_Block):
    out_dir: str = "out"


class RunConfig(_Block):
    seed: int = Field(0, ge=0, lt=2 ** 64)
    geometry: GeometryConfig = GeometryConfig()
    channel: ChannelConfig = ChannelConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    experiment: ExperimentConfig = ExperimentConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _kappa_length(self):
        if isinstance(self.channel.kappa, list) and len(self.channel.kappa) != self.geometry.K:
            raise ValueError("channel.kappa list must have K entries")
        return self

    @property
    def power_budget(self) -> float:
        return 10 ** ((self.optimizer.P_T_dbm - 30) / 10)

    def ao_config(self) -> AOConfig:
        o = self.optimizer
        ls = LineSearchConfig(o.initial_step, o.shrink, o.max_backtracks, o.warm_start)
        return AOConfig(o.tolerance, o.max_outer_iters, o.num_starts, o.phase_max_iters,
                        o.phase_tolerance, o.power_max_iters, o.power_tolerance, ls,
                        o.update_mode, self.power_budget, self.seed)

    def resolved_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))


class ConfigError(Exception):
    pass


def _line_of(text: str, loc) -> int | None:
    """Line of the last key in ``loc`` found by walking the path through ``text``."""
    pos, line = 0, None
    for key in loc:
        if not isinstance(key, str):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            return line
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            where = ".".join(str(x) for x in err["loc"]) or "<root>"
            line = _line_of(text, err["loc"])
            prefix = f"{source}:{line}" if line else source
            lines.append(f"{prefix}: {where}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
