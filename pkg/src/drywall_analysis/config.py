"""Pipeline configuration: defaults, file parsing, and flat echoing.

The config file is flat text with dotted section keys::

    refine.residual_tol = 1.5
    cluster.n_columns = 4

Unknown keys are hard errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError


def _parse_float(v: str) -> float:
    return float(v)


def _parse_int(v: str) -> int:
    return int(v)


def _parse_optional_float(v: str) -> float | None:
    return None if v.lower() in ("none", "") else float(v)


def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the analysis pipeline, with defaults."""

    refine_residual_tol: float = 1.5
    refine_angle_tol: float = 10.0
    refine_dist_tol: float = 3.0
    refine_ransac_threshold: float = 1.0
    refine_ransac_iterations: int = 100
    refine_min_inliers: int = 2

    cluster_n_columns: int = 4
    cluster_scatter_tol: float = 1000.0
    cluster_min_width: float = 50.0
    cluster_merge_consistency_tol: float = 50.0
    cluster_assign_consistency_tol: float = 150.0
    cluster_vp_ransac_threshold: float = 10.0
    cluster_vp_ransac_iterations: int = 500

    rectify_consensus_threshold: float = 2.0
    rectify_consensus_min_inliers: int = 2

    quality_tilt_threshold: float = 1.0
    quality_spacing_cv_threshold: float = 0.05
    quality_expected_spacing: float | None = None
    quality_spacing_rel_tol: float = 0.05
    quality_stage_closed_min_drywall: float = 0.9
    quality_stage_paneled_min_panels: float = 0.5
    quality_stage_insulated_min_insulation: float = 0.5
    quality_stage_skeleton_min_frames: int = 2

    synth_sigma: float = 0.5
    synth_densify: int = 10
    synth_dropout: float = 0.0

    seed: int = 0

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed)

    def to_flat_dict(self) -> dict[str, float | int | bool | None]:
        """Dotted-key view, as echoed into reports."""
        return {key: getattr(self, attr) for key, (attr, _) in sorted(_KEY_REGISTRY.items())}


def _build_registry() -> dict[str, tuple[str, object]]:
    parsers = {
        float: _parse_float,
        int: _parse_int,
        bool: _parse_bool,
    }
    registry: dict[str, tuple[str, object]] = {}
    for f in fields(PipelineConfig):
        if f.name == "seed":
            key = "pipeline.seed"
        else:
            section, _, rest = f.name.partition("_")
            key = f"{section}.{rest}"
        if f.name == "quality_expected_spacing":
            parser = _parse_optional_float
        else:
            parser = parsers[type(f.default)]
        registry[key] = (f.name, parser)
    return registry


_KEY_REGISTRY = _build_registry()


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply ``key = value`` lines on top of defaults.

    Raises:
        ConfigError: unknown key or unparseable value, naming the line.
    """
    cfg = base or PipelineConfig()
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEY_REGISTRY:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        attr, parser = _KEY_REGISTRY[key]
        try:
            overrides[attr] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return replace(cfg, **overrides)


def load_config(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"), base=base)
