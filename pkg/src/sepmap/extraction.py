"""Turn a predicted likelihood map into scored SEP detections.

The map is clamped to [0, 1], split into basins and peak regions with an Otsu
threshold, and each 8-connected peak region yields one detection at its
likelihood-weighted center of mass. The confidence is the region's mean
clamped likelihood, which penalizes spread-out peaks relative to compact ones
of the same mass.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import as_plane, connected_components, otsu_threshold, weighted_centroid

__all__ = ["Detection", "extract_seps", "detections_to_json", "detections_from_json",
           "detections_to_csv", "detections_from_csv"]


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    confidence: float


def extract_seps(likelihood, min_region_area: int = 3, bins: int = 256,
                 scoring: str = "mean") -> list[Detection]:
    """Detections from a likelihood map, sorted by confidence descending.

    `scoring` selects the region confidence: "mean" (default) or "max" of the
    clamped likelihood. Regions smaller than `min_region_area` pixels are
    dropped as numeric speckle. A constant map yields an empty list.
    """
    if scoring not in ("mean", "max"):
        raise ValueError(f"scoring must be 'mean' or 'max', got {scoring!r}")
    plane = np.clip(as_plane(likelihood), 0.0, 1.0)
    try:
        threshold = otsu_threshold(plane, bins=bins)
    except ValueError:
        return []  # constant map: no peaks
    mask = plane > threshold
    regions = connected_components(mask, connectivity=8)

    detections = []
    for label in range(1, regions.region_count + 1):
        pixels = regions.pixels(label)
        if pixels.shape[0] < min_region_area:
            continue
        cx, cy = weighted_centroid(pixels, plane)
        values = plane[pixels[:, 1], pixels[:, 0]].astype(np.float64)
        conf = float(values.mean() if scoring == "mean" else values.max())
        detections.append(Detection(cx, cy, conf))
    detections.sort(key=lambda d: (-d.confidence, d.y, d.x))
    return detections


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def detections_to_json(detections) -> str:
    return json.dumps(
        [{"x": d.x, "y": d.y, "confidence": d.confidence} for d in detections],
        indent=1) + "\n"


def detections_from_json(text_or_path) -> list[Detection]:
    text = text_or_path
    if isinstance(text_or_path, Path):
        text = text_or_path.read_text()
    return [Detection(float(d["x"]), float(d["y"]), float(d["confidence"]))
            for d in json.loads(text)]


def detections_to_csv(detections) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "confidence"])
    for d in detections:
        writer.writerow([repr(d.x), repr(d.y), repr(d.confidence)])
    return buf.getvalue()


def detections_from_csv(text: str) -> list[Detection]:
    rows = list(csv.reader(io.StringIO(text)))
    return [Detection(float(x), float(y), float(c)) for x, y, c in rows[1:]]
