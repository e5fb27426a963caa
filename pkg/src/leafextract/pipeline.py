"""End-to-end leaf extraction and its flat configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .background_marker import BackgroundParams, BackgroundParts, background_parts
from .errors import NoLeafCandidateError, NoVeinFoundError
from .imagecore import as_rgb, resize_longest_side, to_grayscale
from .leaf_marker import LeafMarkerParams, LeafMarkerParts, leaf_marker_parts
from .refinement import (ContourParams, PolarRepair, VeinDecision, VeinParams, detect_primary_vein,
                         polar_repair, refine_with_veins)
from .segmentation import GraphCutParams, segment

__all__ = ["METHODS", "REFINE_MODES", "PipelineConfig", "ExtractionResult", "extract_leaf"]

METHODS = ("watershed", "graphcut")
REFINE_MODES = ("none", "veins", "contour", "full")

# config section name -> attribute of PipelineConfig holding that dataclass
_SECTIONS = {
    "background": "background",
    "leaf_marker": "leaf_marker",
    "graphcut": "graphcut",
    "veins": "veins",
    "contour": "contour",
}


def _parse_scalar(text: str, kind: type, key: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ValueError(f"bad value for {key}: {text!r}") from None
    return text


def _field_kind(dc, f: dataclasses.Field) -> type:
    default = getattr(dc, f.name)
    if default is None:
        return float
    return type(default)


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline.

    Flat keys are ``method``, ``refine`` and ``resize_limit``; stage
    parameters use dotted keys such as ``background.entropy_threshold`` or
    ``veins.symmetry_threshold``. ``graphcut.sigma = auto`` estimates the
    contrast scale per image.
    """

    method: str = "watershed"
    refine: str = "full"
    resize_limit: int = 600
    background: BackgroundParams = field(default_factory=BackgroundParams)
    leaf_marker: LeafMarkerParams = field(default_factory=LeafMarkerParams)
    graphcut: GraphCutParams = field(default_factory=GraphCutParams)
    veins: VeinParams = field(default_factory=VeinParams)
    contour: ContourParams = field(default_factory=ContourParams)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.refine not in REFINE_MODES:
            raise ValueError(f"refine must be one of {REFINE_MODES}")
        if self.resize_limit < 1:
            raise ValueError("resize_limit must be >= 1")

    # -- flat key/value view -------------------------------------------------

    def items(self) -> list[tuple[str, str]]:
        """All ``(key, value)`` pairs as text, in a fixed order."""
        out = [("method", self.method), ("refine", self.refine), ("resize_limit", str(self.resize_limit))]
        for section, attr in _SECTIONS.items():
            dc = getattr(self, attr)
            for f in dataclasses.fields(dc):
                value = getattr(dc, f.name)
                if value is None:
                    text = "auto"
                elif isinstance(value, float):
                    text = repr(value)
                else:
                    text = str(value)
                out.append((f"{section}.{f.name}", text))
        return out

    def serialize(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    @classmethod
    def keys(cls) -> list[str]:
        return [k for k, _ in cls().items()]

    def with_overrides(self, overrides: dict[str, str]) -> "PipelineConfig":
        """Copy with textual ``overrides`` applied; unknown keys are errors."""
        top: dict = {}
        sections: dict[str, dict] = {}
        for key, text in overrides.items():
            key = key.strip()
            if key in ("method", "refine"):
                top[key] = str(text).strip()
            elif key == "resize_limit":
                top[key] = _parse_scalar(str(text), int, key)
            elif "." in key and key.split(".", 1)[0] in _SECTIONS:
                section, name = key.split(".", 1)
                dc = getattr(self, _SECTIONS[section])
                names = {f.name: f for f in dataclasses.fields(dc)}
                if name not in names:
                    raise ValueError(f"unknown config key {key!r}")
                text = str(text).strip()
                if key == "graphcut.sigma" and text.lower() in ("auto", "none"):
                    value = None
                else:
                    value = _parse_scalar(text, _field_kind(dc, names[name]), key)
                sections.setdefault(section, {})[name] = value
            else:
                raise ValueError(f"unknown config key {key!r}")
        for section, values in sections.items():
            attr = _SECTIONS[section]
            top[attr] = dataclasses.replace(getattr(self, attr), **values)
        return dataclasses.replace(self, **top)

    @classmethod
    def parse(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        """Read ``key = value`` lines; ``#`` starts a comment."""
        overrides: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            overrides[key.strip()] = value.strip()
        return (base or cls()).with_overrides(overrides)


@dataclass
class ExtractionResult:
    """Final mask plus every intermediate of one run, at the processed scale."""

    image: np.ndarray
    background: BackgroundParts
    leaf: LeafMarkerParts
    initial: np.ndarray
    after_veins: np.ndarray
    mask: np.ndarray
    veins: VeinDecision | None = None
    polar: PolarRepair | None = None


def extract_leaf(img: np.ndarray, config: PipelineConfig = PipelineConfig()) -> ExtractionResult:
    """Run the whole pipeline on an RGB image.

    Raises
    ------
    NoLeafCandidateError
        When the background marker covers everything or no leaf marker
        survives.
    """
    rgb = resize_longest_side(as_rgb(img), config.resize_limit)
    bgp = background_parts(rgb, config.background)
    bg = bgp.marker
    if bg.all():
        raise NoLeafCandidateError("no leaf candidate")
    lp = leaf_marker_parts(rgb, bg, config.leaf_marker)

    def run(marker, bg_marker):
        return segment(rgb, marker, bg_marker, config.method, config.graphcut)

    initial = run(lp.marker, bg)
    after = initial
    decision = None
    if config.refine in ("veins", "full") and initial.any():
        after, decision = refine_with_veins(initial, rgb, lp.marker, bg, run, config.veins)

    mask = after
    repair = None
    if config.refine in ("contour", "full") and after.any():
        if decision is not None:
            primary = decision.primary
        else:
            try:
                primary = detect_primary_vein(after, to_grayscale(rgb), config.veins)
            except NoVeinFoundError:
                primary = None
        try:
            repair = polar_repair(after, primary, config.contour)
            mask = repair.mask
        except ValueError:
            repair = None
    return ExtractionResult(rgb, bgp, lp, initial, after, mask, decision, repair)
