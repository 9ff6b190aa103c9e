"""Run configuration: an INI file with one section per concern.

Example::

    [mask]
    kind = grid-city
    rows = 4
    cols = 4

    [params]
    phi = 0.06

    [schedule]
    max_steps = 50000

Unset keys take their defaults. ``perturbation.sites`` is a ``;``-separated
list of ``row,col,side,u_value`` squares; empty means one default square
(the central main-street crossing for grid cities, else the grid centre).
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ContractViolation
from .masks import GridCitySpec, gen_channel, gen_grid_city, gen_open_field, gen_ring, load_mask
from .medium import GridMask, OregonatorParams, PerturbationSpec
from .render import RenderConfig
from .runner import RunSchedule
from .sweep import default_phi_grid

MASK_KINDS = ("file", "grid-city", "open-field", "channel", "ring")


@dataclass(frozen=True)
class MaskSource:
    kind: str = "grid-city"
    path: str = ""
    threshold: float = 0.5
    streets_are_bright: bool = True
    width: int = 256
    height: int = 256
    channel_width: int = 9
    rows: int = 4
    cols: int = 4
    main_street_width: int = 9
    side_street_width: int = 3
    block_size: int = 48
    size: int = 120
    street_width: int = 9

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ConfigError(f"mask.kind must be one of {MASK_KINDS}, got {self.kind!r}")

    def grid_city_spec(self) -> GridCitySpec:
        return GridCitySpec(self.rows, self.cols, self.main_street_width,
                            self.side_street_width, self.block_size)

    def build(self) -> GridMask:
        if self.kind == "file":
            return load_mask(self.path, self.threshold, self.streets_are_bright)
        if self.kind == "grid-city":
            return gen_grid_city(self.grid_city_spec())
        if self.kind == "open-field":
            return gen_open_field(self.width, self.height)
        if self.kind == "channel":
            return gen_channel(self.width, self.height, self.channel_width)
        return gen_ring(self.size, self.street_width)


@dataclass(frozen=True)
class MetricsConfig:
    excite_threshold: float = 0.1
    count_stride: int = 1


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    frames: bool = False
    snapshots: bool = True
    figures: bool = True


@dataclass(frozen=True)
class SweepConfig:
    phi_start: float = 0.040
    phi_stop: float = 0.080
    phi_step: float = 0.001
    threads: int = 1

    def grid(self) -> list[float]:
        return default_phi_grid(self.phi_start, self.phi_stop, self.phi_step)


@dataclass(frozen=True)
class AnalysisConfig:
    k: int = 10
    fuzzifier: float = 2.0
    fcm_tol: float = 1e-6
    fcm_max_iter: int = 300
    linkage: str = "average"
    hier_k: int = 3
    particles: int = 30
    inertia: float = 0.72
    c1: float = 1.49
    c2: float = 1.49
    pso_max_iter: int = 500


@dataclass(frozen=True)
class RunConfig:
    mask: MaskSource = field(default_factory=MaskSource)
    params: OregonatorParams = field(default_factory=OregonatorParams)
    perturbations: tuple[PerturbationSpec, ...] = ()
    schedule: RunSchedule = field(default_factory=RunSchedule)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    seed: int = 0

    def resolve_perturbations(self, mask: GridMask) -> tuple[PerturbationSpec, ...]:
        if self.perturbations:
            return self.perturbations
        side = 20
        if self.mask.kind == "grid-city":
            return (PerturbationSpec(self.mask.grid_city_spec().perturbation_origin(side), side),)
        return (PerturbationSpec((mask.height // 2 - side // 2, mask.width // 2 - side // 2), side),)

    def validate(self) -> None:
        if self.mask.kind == "file" and not Path(self.mask.path).is_file():
            raise ConfigError(f"mask file not found: {self.mask.path}")

    def replace(self, section: str, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})


# sections holding a flat dataclass
_SECTIONS = {
    "mask": MaskSource,
    "params": OregonatorParams,
    "schedule": RunSchedule,
    "metrics": MetricsConfig,
    "render": RenderConfig,
    "output": OutputConfig,
    "sweep": SweepConfig,
    "analysis": AnalysisConfig,
}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw: str, default, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or default is None:
            return None if raw.lower() == "none" else float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _format_sites(specs) -> str:
    return "; ".join(f"{p.origin[0]},{p.origin[1]},{p.side},{p.u_value!r}" for p in specs)


def parse_sites(text: str) -> tuple[PerturbationSpec, ...]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        try:
            if len(parts) not in (2, 3, 4):
                raise ValueError(chunk)
            row, col = int(parts[0]), int(parts[1])
            side = int(parts[2]) if len(parts) > 2 else 20
            value = float(parts[3]) if len(parts) > 3 else 1.0
            out.append(PerturbationSpec((row, col), side, value))
        except (ValueError, ContractViolation) as exc:
            raise ConfigError(f"perturbation.sites: bad entry {chunk!r} ({exc})") from None
    return tuple(out)


def to_ini(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for name in _SECTIONS:
        obj = getattr(cfg, name)
        cp[name] = {f.name: _format(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    cp["perturbation"] = {"sites": _format_sites(cfg.perturbations)}
    cp["run"] = {"seed": str(cfg.seed)}
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        for key, value in cp[section].items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def from_ini(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = set(_SECTIONS) | {"perturbation", "run"}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"{source}: unknown section [{section}]")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        default = cls()
        values = {}
        if cp.has_section(name):
            names = {f.name for f in dataclasses.fields(cls)}
            for key, raw in cp[name].items():
                if key not in names:
                    raise ConfigError(f"{source}: unknown key {name}.{key}")
                values[key] = _parse(raw, getattr(default, key), f"{source}: {name}.{key}")
        try:
            kwargs[name] = cls(**values)
        except (ContractViolation, ValueError) as exc:
            raise ConfigError(f"{source}: [{name}] {exc}") from None
    sites = cp.get("perturbation", "sites", fallback="")
    seed = _parse(cp.get("run", "seed", fallback="0"), 0, f"{source}: run.seed")
    return RunConfig(perturbations=parse_sites(sites), seed=seed, **kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return from_ini(text, str(path))
