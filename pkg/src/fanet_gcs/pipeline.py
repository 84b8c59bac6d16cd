"""Ordered enhancement pipelines and their JSON wire form.

A pipeline is a list of operation steps applied left to right. The JSON
contract is shared by the CLI, the HTTP service and the browser console:

    [{"op": "rgb2gray"}, {"op": "edge", "operator": "sobel", "threshold_frac": 0.25}]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import imaging
from .imaging import GrayImage, Histogram256, Image, RgbImage, TypeMismatch


class PipelineParseError(Exception):
    """A step failed to parse or validate; ``step`` is 1-based."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class Rgb2Gray:
    op: str = field(default="rgb2gray", init=False)


@dataclass(frozen=True)
class Complement:
    op: str = field(default="complement", init=False)


@dataclass(frozen=True)
class HistogramStep:
    op: str = field(default="histogram", init=False)


@dataclass(frozen=True)
class GrayAdjust:
    low_in: float = 0.0
    high_in: float = 1.0
    gamma: float = 1.0
    op: str = field(default="gray_adjust", init=False)


@dataclass(frozen=True)
class NoiseFilter:
    kind: str = "median"
    k: int = 3
    op: str = field(default="noise_filter", init=False)


@dataclass(frozen=True)
class EdgeDetect:
    operator: str = "sobel"
    threshold_frac: float = 0.25
    sigma: float = 1.4
    low_frac: float = 0.1
    high_frac: float = 0.3
    op: str = field(default="edge", init=False)


@dataclass(frozen=True)
class RotateQuarter:
    turns: int = 1
    op: str = field(default="rotate", init=False)


EnhancementOp = (
    Rgb2Gray | Complement | HistogramStep | GrayAdjust | NoiseFilter | EdgeDetect | RotateQuarter
)

GRAY_ONLY = (HistogramStep, GrayAdjust, NoiseFilter, EdgeDetect)


def op_to_json(op: EnhancementOp) -> dict[str, Any]:
    if isinstance(op, Rgb2Gray):
        return {"op": "rgb2gray"}
    if isinstance(op, Complement):
        return {"op": "complement"}
    if isinstance(op, HistogramStep):
        return {"op": "histogram"}
    if isinstance(op, GrayAdjust):
        return {"op": "gray_adjust", "low_in": op.low_in, "high_in": op.high_in, "gamma": op.gamma}
    if isinstance(op, NoiseFilter):
        return {"op": "noise_filter", "kind": op.kind, "k": op.k}
    if isinstance(op, EdgeDetect):
        if op.operator == "canny":
            return {
                "op": "edge",
                "operator": "canny",
                "sigma": op.sigma,
                "low_frac": op.low_frac,
                "high_frac": op.high_frac,
            }
        return {"op": "edge", "operator": op.operator, "threshold_frac": op.threshold_frac}
    if isinstance(op, RotateQuarter):
        return {"op": "rotate", "turns": op.turns}
    raise TypeError(f"not an enhancement op: {op!r}")


def pipeline_to_json(ops: list[EnhancementOp]) -> list[dict[str, Any]]:
    return [op_to_json(op) for op in ops]


def _parse_step(spec: dict[str, Any], step: int) -> EnhancementOp:
    if not isinstance(spec, dict) or "op" not in spec:
        raise PipelineParseError("each step must be an object with an 'op' key", step)
    name = spec["op"]
    params = {k: v for k, v in spec.items() if k != "op"}
    try:
        if name == "rgb2gray":
            return Rgb2Gray(**params)
        if name == "complement":
            return Complement(**params)
        if name == "histogram":
            return HistogramStep(**params)
        if name == "gray_adjust":
            op = GrayAdjust(**params)
            imaging.gray_adjust_lut(op.low_in, op.high_in, op.gamma)  # validate window
            return op
        if name == "noise_filter":
            op = NoiseFilter(**params)
            if op.kind not in ("mean", "median"):
                raise PipelineParseError(f"unknown filter kind {op.kind!r}", step)
            if op.k % 2 == 0 or op.k < 3:
                raise PipelineParseError(f"window size must be odd and >= 3, got {op.k}", step)
            return op
        if name == "edge":
            op = EdgeDetect(**params)
            if op.operator not in ("sobel", "prewitt", "canny"):
                raise PipelineParseError(f"unknown edge operator {op.operator!r}", step)
            if op.operator != "canny" and not (0.0 < op.threshold_frac <= 1.0):
                raise PipelineParseError(
                    f"threshold_frac must be in (0, 1], got {op.threshold_frac}", step
                )
            if op.operator == "canny" and (
                op.sigma <= 0 or not (0.0 < op.low_frac < op.high_frac <= 1.0)
            ):
                raise PipelineParseError("bad canny parameters", step)
            return op
        if name == "rotate":
            op = RotateQuarter(**params)
            if op.turns not in (0, 1, 2, 3):
                raise PipelineParseError(f"turns must be 0..3, got {op.turns}", step)
            return op
    except TypeError as exc:  # unexpected keyword, wrong arity
        raise PipelineParseError(str(exc), step) from exc
    except imaging.ImagingError as exc:
        raise PipelineParseError(str(exc), step) from exc
    raise PipelineParseError(f"unknown op {name!r}", step)


def parse_pipeline(spec: list[dict[str, Any]]) -> list[EnhancementOp]:
    if not isinstance(spec, list):
        raise PipelineParseError("pipeline must be a JSON array of steps", 1)
    return [_parse_step(entry, i + 1) for i, entry in enumerate(spec)]


@dataclass
class LineageEntry:
    """What ran at one pipeline step; histogram steps also carry their bins."""

    op: dict[str, Any]
    histogram: Histogram256 | None = None


@dataclass
class PipelineResult:
    image: Image
    lineage: list[LineageEntry]

    def histograms(self) -> list[tuple[int, Histogram256]]:
        """(1-based step, bins) for every histogram step in the pipeline."""
        return [
            (i + 1, entry.histogram)
            for i, entry in enumerate(self.lineage)
            if entry.histogram is not None
        ]


def apply_pipeline(img: Image, ops: list[EnhancementOp]) -> PipelineResult:
    """Run ops left to right, recording lineage.

    Gray-only steps demand a grayscale input; hitting one while the image
    is still RGB raises TypeMismatch naming the offending step (1-based).
    Histogram steps record their bins and leave the image untouched.
    """
    current: Image = img
    lineage: list[LineageEntry] = []
    for i, op in enumerate(ops):
        step = i + 1
        is_rgb = isinstance(current, RgbImage)
        if isinstance(op, GRAY_ONLY) and is_rgb:
            raise TypeMismatch(
                f"step {step} ({op.op}) needs a grayscale image; add rgb2gray first", step
            )
        entry = LineageEntry(op=op_to_json(op))
        if isinstance(op, Rgb2Gray):
            if not is_rgb:
                raise TypeMismatch(f"step {step} (rgb2gray) needs an RGB image", step)
            current = imaging.rgb_to_gray(current)
        elif isinstance(op, Complement):
            current = imaging.complement(current)
        elif isinstance(op, HistogramStep):
            entry.histogram = imaging.histogram(current)
        elif isinstance(op, GrayAdjust):
            current = imaging.gray_adjust(current, op.low_in, op.high_in, op.gamma)
        elif isinstance(op, NoiseFilter):
            current = imaging.noise_filter(current, op.kind, op.k)
        elif isinstance(op, EdgeDetect):
            current = imaging.edge_detect(
                current,
                op.operator,
                threshold_frac=op.threshold_frac,
                sigma=op.sigma,
                low_frac=op.low_frac,
                high_frac=op.high_frac,
            )
        elif isinstance(op, RotateQuarter):
            current = imaging.rotate_quarter(current, op.turns)
        else:
            raise TypeError(f"not an enhancement op: {op!r}")
        lineage.append(entry)
    return PipelineResult(image=current, lineage=lineage)
