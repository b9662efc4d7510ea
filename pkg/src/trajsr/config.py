"""Pipeline configuration: one TOML file, one section per stage.

Example::

    seed = 7

    [paths]
    graph = "graph.json"
    out_dir = "run"

    [gen]
    n_traj = 200
    dt_s = 15.0

    [split]
    ratios = [0.8, 0.1, 0.1]

    [degrade]
    kind = "hex"        # hex | round | noise
    edge_len_m = 500.0  # or level = 7

    [model]
    epochs = 100

    [hmm]
    sigma_m = 10.0

    [eval]
    bins_km = [0.0, 0.25, 0.5, 1.0, inf]

Command-line flags override file values, which override the defaults below.
Relative paths in the file are resolved against the file's directory.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .degrade import resolution_edge_len
from .errors import ConfigError, TrajSRError
from .mapmatch import HmmParams
from .model.network import ModelConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEGRADE_KINDS = ("hex", "round", "noise")
DEFAULT_HEX_LEVEL = 7


@dataclass(frozen=True)
class GenSection:
    n_traj: int = 200
    speed_mps: float = 8.0
    dt_s: float = 15.0
    max_len: int = 128
    bbox: tuple[tuple[float, float], tuple[float, float]] | None = None


@dataclass(frozen=True)
class DegradeSection:
    kind: str = "hex"
    level: int | None = None
    edge_len_m: float | None = None
    decimals: int = 3
    sigma_m: float = 10.0

    def hex_edge_m(self) -> float:
        if self.edge_len_m is not None:
            return float(self.edge_len_m)
        return resolution_edge_len(DEFAULT_HEX_LEVEL if self.level is None else int(self.level))


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    graph: Path | None = None
    out_dir: Path = Path("out")
    gen: GenSection = field(default_factory=GenSection)
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    degrade: DegradeSection = field(default_factory=DegradeSection)
    model: dict = field(default_factory=dict)
    hmm: dict = field(default_factory=dict)
    bins_km: tuple[float, ...] | None = None

    def model_config(self) -> ModelConfig:
        """Model settings; the model seed follows the global seed unless set explicitly."""
        return ModelConfig.from_dict({"seed": self.seed, **self.model})

    def hmm_params(self) -> HmmParams:
        """HMM settings; the candidate radius defaults to twice the hex edge length."""
        d = {"candidate_radius_m": 2.0 * self.degrade.hex_edge_m(), **self.hmm}
        return HmmParams(**d)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _section(cls, raw: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    return cls(**raw)


def _check_keys(raw: dict, allowed: set[str], where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def parse_config(doc: dict, base_dir: Path | None = None) -> PipelineConfig:
    _check_keys(doc, {"seed", "paths", "gen", "split", "degrade", "model", "hmm", "eval"}, "config")
    base_dir = base_dir or Path(".")
    paths = doc.get("paths", {})
    _check_keys(paths, {"graph", "out_dir"}, "[paths]")
    try:
        gen_raw = dict(doc.get("gen", {}))
        if "bbox" in gen_raw:
            (a, b), (c, d) = gen_raw["bbox"]
            gen_raw["bbox"] = ((float(a), float(b)), (float(c), float(d)))
        gen = _section(GenSection, gen_raw, "gen")
        deg = _section(DegradeSection, doc.get("degrade", {}), "degrade")
        split = doc.get("split", {})
        _check_keys(split, {"ratios"}, "[split]")
        ratios = tuple(float(r) for r in split.get("ratios", (0.8, 0.1, 0.1)))
        ev = doc.get("eval", {})
        _check_keys(ev, {"bins_km"}, "[eval]")
        bins = tuple(float(b) for b in ev["bins_km"]) if "bins_km" in ev else None
        cfg = PipelineConfig(
            seed=int(doc.get("seed", 0)),
            graph=(base_dir / paths["graph"]) if "graph" in paths else None,
            out_dir=base_dir / paths.get("out_dir", "out"),
            gen=gen, split=ratios, degrade=deg,
            model=dict(doc.get("model", {})), hmm=dict(doc.get("hmm", {})), bins_km=bins,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    if cfg.degrade.kind not in DEGRADE_KINDS:
        raise ConfigError(f"degrade.kind must be one of {DEGRADE_KINDS}, got {cfg.degrade.kind!r}")
    if len(cfg.split) != 3:
        raise ConfigError("split.ratios needs three numbers")
    if cfg.bins_km is not None and any(math.isnan(b) for b in cfg.bins_km):
        raise ConfigError("eval.bins_km must not contain nan")
    # let each module check its own block
    try:
        cfg.degrade.hex_edge_m()
        cfg.model_config()
        cfg.hmm_params()
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    except TrajSRError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, path.parent)
