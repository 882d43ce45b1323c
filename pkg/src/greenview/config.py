"""Pipeline configuration: TOML file plus command-line overrides (flags win)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .baseline import BaselineConfig
from .errors import InvalidQuantile

BACKEND_KINDS = ("baseline", "mask_dir", "model")


@dataclass(frozen=True)
class PipelineConfig:
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    backend_kind: str = "baseline"
    backend_path: str | None = None
    model_kind: str = "segmentation"
    workers: int = 1
    cache_dir: str = ".greenview_cache"
    quantiles: tuple[float, float] = (0.05, 0.95)
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.backend_kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.backend_kind!r}")
        if self.backend_kind != "baseline" and not self.backend_path:
            raise ValueError(f"backend {self.backend_kind!r} requires a path")
        lo, hi = self.quantiles
        if not 0.0 <= lo <= 1.0 or not 0.0 <= hi <= 1.0 or lo > hi:
            raise InvalidQuantile(f"quantiles {self.quantiles}")


def load_config(path) -> PipelineConfig:
    with open(Path(path), "rb") as fh:
        doc = tomllib.load(fh)
    baseline = BaselineConfig(**doc.get("baseline", {}))
    backend = doc.get("backend", {})
    quant = doc.get("quantiles", {})
    return PipelineConfig(
        baseline=baseline,
        backend_kind=backend.get("kind", "baseline"),
        backend_path=backend.get("path") or None,
        model_kind=backend.get("model_kind", "segmentation"),
        workers=int(doc.get("workers", 1)),
        cache_dir=str(doc.get("cache_dir", ".greenview_cache")),
        quantiles=(float(quant.get("lo", 0.05)), float(quant.get("hi", 0.95))),
        seed=int(doc.get("seed", 0)),
    )


def parse_backend_spec(spec: str) -> dict:
    """Parse a --backend flag: ``baseline``, ``mask_dir:PATH``, or
    ``model:PATH[:segmentation|regression]``."""
    parts = spec.split(":")
    kind = parts[0]
    if kind == "baseline":
        return {"backend_kind": "baseline", "backend_path": None}
    if kind == "mask_dir":
        if len(parts) < 2 or not parts[1]:
            raise ValueError("mask_dir backend needs a path: mask_dir:PATH")
        return {"backend_kind": "mask_dir", "backend_path": ":".join(parts[1:])}
    if kind == "model":
        if len(parts) < 2 or not parts[1]:
            raise ValueError("model backend needs a path: model:PATH[:KIND]")
        model_kind = "segmentation"
        path_parts = parts[1:]
        if path_parts[-1] in ("segmentation", "regression"):
            model_kind = path_parts[-1]
            path_parts = path_parts[:-1]
        return {
            "backend_kind": "model",
            "backend_path": ":".join(path_parts),
            "model_kind": model_kind,
        }
    raise ValueError(f"unknown backend {spec!r}")


def apply_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    clean = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **clean) if clean else cfg
