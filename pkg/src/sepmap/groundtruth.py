"""Ground-truth handling: annotations, training-target maps, augmentation.

An annotation carries point SEPs for rosette-type plants and emergence-region
polygons for herbaceous plants; polygons reduce to their area centroid. The
training target for an image is a Gaussian likelihood map built from the exact
distance transform over all SEPs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import MultiChannelRaster, distance_transform

__all__ = [
    "SepPoint",
    "RegionAnnotation",
    "Annotation",
    "GroundTruthMap",
    "region_to_sep",
    "make_groundtruth",
    "augment",
    "rotate90cw",
    "load_annotation",
    "save_annotation",
]

SPECIES = ("crop", "weed")


@dataclass(frozen=True)
class SepPoint:
    x: float
    y: float
    species: str = "crop"


@dataclass(frozen=True)
class RegionAnnotation:
    polygon: tuple  # ((x, y), ...) at least 3 vertices
    species: str = "weed"


@dataclass(frozen=True)
class Annotation:
    """Per-image ground truth: point SEPs plus stem-emergence polygons."""

    image_id: str
    seps: tuple = ()
    regions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "seps", tuple(self.seps))
        object.__setattr__(self, "regions", tuple(self.regions))
        for s in self.seps:
            if s.species not in SPECIES:
                raise ValueError(f"unknown species {s.species!r}")
        for r in self.regions:
            if r.species not in SPECIES:
                raise ValueError(f"unknown species {r.species!r}")
            if len(r.polygon) < 3:
                raise ValueError("polygon needs at least 3 vertices")

    def all_seps(self) -> list[tuple[float, float]]:
        """Point SEPs plus region centroids, in annotation order."""
        pts = [(s.x, s.y) for s in self.seps]
        pts.extend(region_to_sep(r.polygon) for r in self.regions)
        return pts


@dataclass(frozen=True)
class GroundTruthMap:
    """Gaussian likelihood target: 1.0 at SEP pixels, decaying with distance."""

    likelihood: MultiChannelRaster
    sigma: float
    seps: tuple

    def plane(self) -> np.ndarray:
        return self.likelihood.plane(0)


def region_to_sep(polygon) -> tuple[float, float]:
    """Area centroid of a simple polygon (shoelace formula).

    Exact and resolution-independent; vertex order may be either winding.
    """
    pts = np.asarray(polygon, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError(f"polygon must be (N>=3, 2), got shape {pts.shape}")
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area2 = cross.sum()
    if abs(area2) < 1e-12:
        raise ValueError("degenerate polygon: zero area")
    cx = ((x + xn) * cross).sum() / (3.0 * area2)
    cy = ((y + yn) * cross).sum() / (3.0 * area2)
    return float(cx), float(cy)


def make_groundtruth(annotation: Annotation, width: int, height: int, sigma: float) -> GroundTruthMap:
    """Gaussian likelihood map r = exp(-d^2 / (2 sigma^2)) over all SEPs."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    seps = annotation.all_seps()
    if not seps:
        raise ValueError("no SEPs")
    pixels = []
    for x, y in seps:
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"SEP ({x}, {y}) outside image {width}x{height}")
        # Nearest pixel, clamped so edge coordinates stay on the grid.
        pixels.append((min(int(round(x)), width - 1), min(int(round(y)), height - 1)))
    d = distance_transform(pixels, width, height).plane(0).astype(np.float64)
    r = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return GroundTruthMap(
        likelihood=MultiChannelRaster(r.astype(np.float32)),
        sigma=float(sigma),
        seps=tuple((float(x), float(y)) for x, y in seps),
    )


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def rotate90cw(arr: np.ndarray, times: int = 1) -> np.ndarray:
    """Exact clockwise quarter turns; a pixel at (x, y) moves to (H-1-y, x)."""
    return np.ascontiguousarray(np.rot90(arr, k=-times))


def _rotate_nn(arr: np.ndarray, angle_deg: float) -> np.ndarray:
    """Nearest-neighbor rotation about the image center, out-of-bounds as 0."""
    h, w = arr.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ang = math.radians(angle_deg)
    cos_a, sin_a = math.cos(ang), math.sin(ang)
    ys, xs = np.mgrid[0:h, 0:w]
    dx, dy = xs - cx, ys - cy
    # Inverse map: rotate output coordinates back by -angle to find the source,
    # matching rotate90cw for quarter turns ((x, y) -> (H-1-y, x)).
    sx = np.rint(cos_a * dx + sin_a * dy + cx).astype(np.intp)
    sy = np.rint(-sin_a * dx + cos_a * dy + cy).astype(np.intp)
    valid = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    out = np.zeros_like(arr)
    out[valid] = arr[sy[valid], sx[valid]]
    return out


def _rotate(arr: np.ndarray, k45: int) -> np.ndarray:
    if k45 % 2 == 0:
        return rotate90cw(arr, (k45 // 2) % 4)
    return _rotate_nn(arr, 45.0 * k45)


def augment(image: np.ndarray, target: np.ndarray, crop_count: int = 4,
            crop_size: tuple[int, int] | None = None, rng_seed: int = 0):
    """Systematic augmentation of an (image, target) training pair.

    Returns 8 rotations (multiples of 45 deg; quarter turns are exact, the
    45 deg variants use nearest-neighbor resampling with zero fill), the
    horizontal and vertical mirrors, and `crop_count` random crops whose
    top-left corners are sampled uniformly. The same transform is applied to
    image and target; deterministic for a given seed.
    """
    image = np.asarray(image)
    target = np.asarray(target)
    if image.shape[:2] != target.shape[:2]:
        raise ValueError(f"image {image.shape[:2]} and target {target.shape[:2]} differ")
    h, w = image.shape[:2]
    if crop_size is None:
        crop_size = (h, w)
    ch, cw = crop_size
    if ch > h or cw > w:
        raise ValueError(f"crop {crop_size} larger than image {(h, w)}")

    pairs = [(_rotate(image, k), _rotate(target, k)) for k in range(8)]
    pairs.append((np.ascontiguousarray(image[:, ::-1]), np.ascontiguousarray(target[:, ::-1])))
    pairs.append((np.ascontiguousarray(image[::-1, :]), np.ascontiguousarray(target[::-1, :])))

    rng = np.random.default_rng(rng_seed)
    for _ in range(crop_count):
        y0 = int(rng.integers(0, h - ch + 1))
        x0 = int(rng.integers(0, w - cw + 1))
        pairs.append((image[y0:y0 + ch, x0:x0 + cw].copy(),
                      target[y0:y0 + ch, x0:x0 + cw].copy()))
    return pairs


# ---------------------------------------------------------------------------
# Annotation JSON
# ---------------------------------------------------------------------------


def save_annotation(path, annotation: Annotation) -> None:
    doc = {
        "image_id": annotation.image_id,
        "seps": [
            {"x": float(s.x), "y": float(s.y), "species": s.species, "uncertain": False}
            for s in annotation.seps
        ],
        "regions": [
            {"polygon": [[float(x), float(y)] for x, y in r.polygon],
             "species": r.species, "uncertain": False}
            for r in annotation.regions
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_annotation(path) -> Annotation:
    """Load one annotation file; instances flagged uncertain are dropped."""
    doc = json.loads(Path(path).read_text())
    seps = tuple(
        SepPoint(float(s["x"]), float(s["y"]), s.get("species", "crop"))
        for s in doc.get("seps", [])
        if not s.get("uncertain", False)
    )
    regions = tuple(
        RegionAnnotation(tuple((float(x), float(y)) for x, y in r["polygon"]),
                         r.get("species", "weed"))
        for r in doc.get("regions", [])
        if not r.get("uncertain", False)
    )
    return Annotation(image_id=doc["image_id"], seps=seps, regions=regions)
