"""Pipeline configuration: flat ``key = value`` files plus ``RELAYOUT_*`` env overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

ENV_PREFIX = "RELAYOUT_"


@dataclass(frozen=True)
class PipelineConfig:
    # region tree
    phi: float = 0.5
    eps_par: float = 0.05
    align_tol: float = 0.01
    # salient blocks
    tau_bin: float = 0.5
    s_min: float = 0.3
    max_blocks: int = 4
    # prototypes and sampling
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    theta: float = 6.0
    k_clusters: int = 8
    seed: int = 0
    # dataset
    category_order: tuple[str, ...] = ("text", "logo", "underlay", "embellishment", "banner")
    text_categories: tuple[str, ...] = ("text",)
    underlay_categories: tuple[str, ...] = ("underlay",)
    banner_category: str = "banner"
    banner_threshold: float = 0.95
    merge_banners: bool = True
    task: str = "gen_with_class"
    failure_budget: float = 0.01
    jobs: int = 1
    # paths
    input: str = ""
    saliency_dir: str = ""
    output_dir: str = "out"

    def __post_init__(self):
        checks = [
            (0 < self.phi <= 1, "phi must lie in (0, 1]"),
            (self.eps_par >= 0, "eps_par must be >= 0"),
            (self.align_tol >= 0, "align_tol must be >= 0"),
            (0 <= self.tau_bin <= 1, "tau_bin must lie in [0, 1]"),
            (-1 <= self.s_min <= 1, "s_min must lie in [-1, 1]"),
            (0 <= self.max_blocks <= 4, "max_blocks must lie in [0, 4]"),
            (self.theta > 0, "theta must be positive"),
            (self.k_clusters >= 1, "k_clusters must be >= 1"),
            (0 <= self.banner_threshold <= 1, "banner_threshold must lie in [0, 1]"),
            (0 <= self.failure_budget <= 1, "failure_budget must lie in [0, 1]"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def content_dict(self) -> dict:
        """Settings that can change annotation output (not where it goes, nor worker count)."""
        data = dataclasses.asdict(self)
        for key in ("output_dir", "jobs"):
            data.pop(key)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    def hash(self) -> str:
        blob = json.dumps(self.content_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)


def _coerce(name: str, default, raw: str):
    raw = raw.strip()
    if isinstance(default, bool):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    return raw


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | Path | None = None, overrides: Mapping[str, object] | None = None,
                env: Mapping[str, str] | None = None) -> PipelineConfig:
    """Defaults, then the file, then ``RELAYOUT_*`` env vars, then ``overrides``."""
    env = os.environ if env is None else env
    defaults = PipelineConfig()
    known = {f.name: getattr(defaults, f.name) for f in fields(PipelineConfig)}
    raw: dict[str, str] = {}
    if path is not None:
        raw.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key, value in env.items():
        name = key[len(ENV_PREFIX):].lower()
        if key.startswith(ENV_PREFIX) and name in known:
            raw[name] = value
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    values = {k: _coerce(k, known[k], v) for k, v in raw.items()}
    for k, v in (overrides or {}).items():
        if k not in known:
            raise ValueError(f"unknown config key {k!r}")
        if v is not None:
            values[k] = v
    return PipelineConfig(**values)
