"""Run configuration: a flat ``[run]`` section in an INI file."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from lprobe.errors import ConfigError
from lprobe.landscape import ProbeConfig
from lprobe.network import NetworkSpec
from lprobe.pde import Problem, make_problem

REQUIRED = ("problem", "network", "loss", "quad", "epochs", "init_seed")


@dataclass(frozen=True)
class RunConfig:
    problem: str
    network: str
    loss: str
    quad: str
    epochs: int
    init_seed: int
    name: str = "run"
    dim: int = 0  # only read for boxnd_sine
    width: int = 4
    blocks: int = 1
    activation: str = "swish"
    eval_quad: str = ""  # empty: problem default
    direction_seed: int = 0
    probe_dirs: int = 100  # M
    probe_l: float = 0.01
    probe_grid: int = 100  # m
    snapshot_every: int = 500
    lr: float = 1e-3
    init_from: str = ""
    grad_tol: float = 0.0  # 0 disables early stopping
    out_dir: str = "runs"

    def __post_init__(self):
        if self.loss not in ("dgm", "drm"):
            raise ConfigError(f"loss must be dgm or drm, got {self.loss!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        self.make_problem()
        self.network_spec()

    def make_problem(self) -> Problem:
        return make_problem(self.problem, self.dim or None)

    def network_spec(self) -> NetworkSpec:
        d = self.make_problem().d
        return NetworkSpec(self.network, d, self.width, self.blocks, self.activation)

    def probe_config(self) -> ProbeConfig:
        return ProbeConfig(self.probe_dirs, self.probe_l, self.probe_grid, self.direction_seed)

    @property
    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.name

    def to_ini(self) -> str:
        lines = ["[run]"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def parse_config(text: str, **overrides) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not parser.has_section("run"):
        raise ConfigError("config has no [run] section")
    raw = dict(parser["run"])
    raw.update({k: str(v) for k, v in overrides.items() if v is not None})
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing config key: {key}")
    known = {f.name: f.type for f in fields(RunConfig)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, text_value in raw.items():
        kind = known[key]
        try:
            if kind == "int":
                kwargs[key] = int(text_value)
            elif kind == "float":
                kwargs[key] = float(text_value)
            else:
                kwargs[key] = text_value.strip()
        except ValueError:
            raise ConfigError(f"config key {key}: cannot parse {text_value!r}") from None
    return RunConfig(**kwargs)


def load_config(path, **overrides) -> RunConfig:
    return parse_config(Path(path).read_text(), **overrides)
