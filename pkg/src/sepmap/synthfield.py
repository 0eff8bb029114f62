"""Deterministic synthetic field data: images, annotations, trajectories.

Crops are rosette plants (elliptical leaves radiating from the stem point),
weeds are grass-like blade bundles whose emergence region is a fixed world
polygon. Rendering is deliberately crude flat shading; the point is a
learnable localization task with exact ground truth, not photorealism. The
soil pattern and plant geometry are anchored in world coordinates, while leaf
arrangement regenerates per rendering run (so two mapping runs of one field
see the same plants with different appearance).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geomap import CameraConfig, GnssFix, OdometryMeasurement, Pose2D, world_to_pixel
from .groundtruth import Annotation, RegionAnnotation, SepPoint, region_to_sep

__all__ = ["FieldConfig", "Plant", "FieldTruth", "generate_field", "render_views",
           "corrupt_sensors", "save_field_truth", "load_field_truth"]

GROWTH_STAGES = ("early", "mid", "late")

# Per-stage leaf counts and lengths (mm); late plants have more, longer leaves.
_STAGE_LEAVES = {"early": (2, 4), "mid": (4, 6), "late": (6, 9)}
_STAGE_LENGTH = {"early": (8.0, 14.0), "mid": (14.0, 22.0), "late": (22.0, 34.0)}


@dataclass(frozen=True)
class FieldConfig:
    n_images: int = 250
    image_size: int = 64
    ground_res_mm: float = 2.0          # mm per pixel at nadir
    camera_height_mm: float = 1000.0
    pose_step_mm: float = 20.0
    pose_dt_s: float = 0.5
    field_width_mm: float = 128.0
    row_spacing_mm: float = 48.0
    plant_spacing_mm: float = 56.0
    row_jitter_mm: float = 6.0
    growth_stage: str = "mid"
    weed_density_per_m2: float = 8.0
    gnss_sigma_mm: float = 7.9 / 1.96   # 95% radial error at 7.9 mm
    odo_sigma_per_mm: float = 0.01
    odo_sigma_per_rad: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if self.growth_stage not in GROWTH_STAGES:
            raise ValueError(f"growth_stage must be one of {GROWTH_STAGES}")
        if self.row_spacing_mm <= 0 or self.plant_spacing_mm <= 0:
            raise ValueError("spacings must be positive")
        if self.ground_res_mm <= 0:
            raise ValueError("ground resolution must be positive")
        if self.min_separation_mm > min(self.row_spacing_mm - 2.0, self.plant_spacing_mm - 2 * self.row_jitter_mm):
            raise ValueError("plant spacing violates the minimum separation constraint")

    @property
    def min_separation_mm(self) -> float:
        # The evaluation acceptance boundary: 20 px at the ground resolution.
        return 20.0 * self.ground_res_mm

    @property
    def footprint_mm(self) -> float:
        return self.image_size * self.ground_res_mm

    @property
    def field_length_mm(self) -> float:
        return (self.n_images - 1) * self.pose_step_mm + self.footprint_mm

    def camera(self) -> CameraConfig:
        c = (self.image_size - 1) / 2.0
        return CameraConfig(
            focal_px=self.camera_height_mm / self.ground_res_mm,
            cx=c, cy=c, height_mm=self.camera_height_mm)


@dataclass(frozen=True)
class Plant:
    species: str                 # "crop" | "weed"
    x: float                     # SEP world position, mm
    y: float
    extent_mm: float             # radius bound of anything rendered for it
    polygon: tuple = ()          # weeds: fixed world emergence region


@dataclass(frozen=True)
class FieldTruth:
    config: FieldConfig
    plants: tuple
    true_poses: tuple            # (timestamp, x, y, theta)
    gnss_fixes: tuple
    odometry: tuple


def generate_field(config: FieldConfig) -> FieldTruth:
    """Place plants on a jittered row grid, weeds uniformly, and lay out the
    camera trajectory with its noisy sensor streams. Pure in the seed."""
    rng = np.random.default_rng([config.rng_seed, 0xF1E1D])
    length, width = config.field_length_mm, config.field_width_mm
    margin = config.footprint_mm / 2.0

    n_rows = max(1, int(width // config.row_spacing_mm))
    row_start = (width - (n_rows - 1) * config.row_spacing_mm) / 2.0
    stage_max_len = _STAGE_LENGTH[config.growth_stage][1]
    extent = stage_max_len + 3.0

    plants: list[Plant] = []
    for r in range(n_rows):
        row_y = row_start + r * config.row_spacing_mm
        x = margin + config.plant_spacing_mm / 2.0
        while x < length - margin:
            jx = float(rng.uniform(-config.row_jitter_mm, config.row_jitter_mm))
            jy = float(rng.uniform(-2.0, 2.0))
            plants.append(Plant("crop", x + jx, row_y + jy, extent))
            x += config.plant_spacing_mm

    area_m2 = (length / 1000.0) * (width / 1000.0)
    n_weeds = int(rng.poisson(config.weed_density_per_m2 * area_m2))
    min_sep = config.min_separation_mm
    for _ in range(n_weeds):
        placed = False
        for _attempt in range(1000):
            wx = float(rng.uniform(margin / 2, length - margin / 2))
            wy = float(rng.uniform(4.0, width - 4.0))
            if all(math.hypot(p.x - wx, p.y - wy) >= min_sep for p in plants):
                placed = True
                break
        if not placed:
            raise ValueError("weed density too high for the minimum plant separation")
        poly = _emergence_polygon(wx, wy, rng)
        cx, cy = region_to_sep(poly)
        plants.append(Plant("weed", cx, cy, 28.0, polygon=poly))

    poses = tuple(
        (i * config.pose_dt_s, margin + i * config.pose_step_mm, width / 2.0, 0.0)
        for i in range(config.n_images))
    fixes, odometry = corrupt_sensors(
        poses, config.gnss_sigma_mm, config.odo_sigma_per_mm, config.odo_sigma_per_rad,
        rng_seed=[config.rng_seed, 0x5E45])
    return FieldTruth(config=config, plants=tuple(plants), true_poses=poses,
                      gnss_fixes=fixes, odometry=odometry)


def _emergence_polygon(cx: float, cy: float, rng: np.random.Generator) -> tuple:
    """Small irregular convex-ish polygon around a weed's emergence point."""
    n = int(rng.integers(5, 8))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n))
    radii = rng.uniform(3.0, 6.5, size=n)
    return tuple((cx + r * math.cos(a), cy + r * math.sin(a))
                 for a, r in zip(angles, radii))


def corrupt_sensors(true_poses, gnss_sigma_mm: float, odo_sigma_per_mm: float = 0.01,
                    odo_sigma_per_rad: float = 0.01, rng_seed=0):
    """Noisy GNSS and odometry streams for a true trajectory.

    GNSS noise is isotropic with a half-normal radial magnitude, so 95% of
    radial errors fall below 1.96 * gnss_sigma_mm. Odometry noise scales with
    the step's distance and heading change; zero noise parameters reproduce
    the truth exactly.
    """
    rng = np.random.default_rng(rng_seed)
    fixes = []
    odometry = []
    prev = None
    for t, x, y, theta in true_poses:
        if gnss_sigma_mm > 0:
            radius = abs(float(rng.normal(0.0, gnss_sigma_mm)))
            phi = float(rng.uniform(0.0, 2.0 * math.pi))
            fx, fy = x + radius * math.cos(phi), y + radius * math.sin(phi)
            sigma = gnss_sigma_mm
        else:
            fx, fy, sigma = x, y, 1e-3
        fixes.append(GnssFix(t, fx, fy, sigma))

        if prev is None:
            d, dth = 0.0, 0.0
        else:
            d = math.hypot(x - prev[1], y - prev[2])
            dth = theta - prev[3]
        if odo_sigma_per_mm > 0 and d > 0:
            d += float(rng.normal(0.0, odo_sigma_per_mm * d))
        if odo_sigma_per_rad > 0 and dth != 0:
            dth += float(rng.normal(0.0, odo_sigma_per_rad * abs(dth)))
        odometry.append(OdometryMeasurement(
            t, d, dth,
            sigma_per_mm=max(odo_sigma_per_mm, 1e-6),
            sigma_per_rad=max(odo_sigma_per_rad, 1e-6)))
        prev = (t, x, y, theta)
    return tuple(fixes), tuple(odometry)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _lattice_hash(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic [0, 1) value per lattice cell, overflow-free in int64."""
    h = (ix * 73856093 + iy * 19349663 + (seed & 0x7FFFFFFF) * 83492791) & 0x7FFFFFFF
    h = (h ^ (h >> 13)) * 1274126177 & 0x7FFFFFFF
    h = h ^ (h >> 16)
    return (h & 0xFFFFFF) / float(1 << 24)


def _soil_noise(wx: np.ndarray, wy: np.ndarray, seed: int, scale_mm: float = 24.0) -> np.ndarray:
    """World-anchored smooth value noise in [0, 1]."""
    gx, gy = wx / scale_mm, wy / scale_mm
    ix, iy = np.floor(gx).astype(np.int64), np.floor(gy).astype(np.int64)
    fx, fy = gx - ix, gy - iy
    sx = fx * fx * (3.0 - 2.0 * fx)
    sy = fy * fy * (3.0 - 2.0 * fy)
    v00 = _lattice_hash(ix, iy, seed)
    v10 = _lattice_hash(ix + 1, iy, seed)
    v01 = _lattice_hash(ix, iy + 1, seed)
    v11 = _lattice_hash(ix + 1, iy + 1, seed)
    return (v00 * (1 - sx) + v10 * sx) * (1 - sy) + (v01 * (1 - sx) + v11 * sx) * sy


def _paint_ellipse(rgbn, wx, wy, center, angle, a, b, color):
    dx, dy = wx - center[0], wy - center[1]
    c, s = math.cos(angle), math.sin(angle)
    u = (c * dx + s * dy) / a
    v = (-s * dx + c * dy) / b
    mask = u * u + v * v <= 1.0
    rgbn[mask] = color


def _paint_capsule(rgbn, wx, wy, p0, p1, radius, color):
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    denom = vx * vx + vy * vy
    if denom < 1e-12:
        t = np.zeros_like(wx)
    else:
        t = np.clip(((wx - p0[0]) * vx + (wy - p0[1]) * vy) / denom, 0.0, 1.0)
    dx = wx - (p0[0] + t * vx)
    dy = wy - (p0[1] + t * vy)
    rgbn[dx * dx + dy * dy <= radius * radius] = color


def _render_crop(rgbn, wx, wy, plant: Plant, stage: str, rng: np.random.Generator):
    n_lo, n_hi = _STAGE_LEAVES[stage]
    len_lo, len_hi = _STAGE_LENGTH[stage]
    n_leaves = int(rng.integers(n_lo, n_hi + 1))
    base = float(rng.uniform(0.0, 2.0 * math.pi))
    green = float(rng.uniform(0.40, 0.55))
    for i in range(n_leaves):
        ang = base + i * 2.0 * math.pi / n_leaves + float(rng.uniform(-0.25, 0.25))
        length = float(rng.uniform(len_lo, len_hi))
        width = length * float(rng.uniform(0.30, 0.45))
        cx = plant.x + 0.5 * length * math.cos(ang)
        cy = plant.y + 0.5 * length * math.sin(ang)
        shade = float(rng.uniform(-0.06, 0.06))
        color = (0.10 + shade, green + shade, 0.12 + shade, 0.85 + shade)
        _paint_ellipse(rgbn, wx, wy, (cx, cy), ang, length / 2.0, width / 2.0, color)
    # Rosette heart: darker disk over the stem point, the visual cue that the
    # emergence point itself is inside the frame.
    _paint_ellipse(rgbn, wx, wy, (plant.x, plant.y), 0.0, 3.0, 3.0,
                   (0.07, green - 0.16, 0.09, 0.55))


def _render_weed(rgbn, wx, wy, plant: Plant, rng: np.random.Generator):
    n_blades = int(rng.integers(3, 7))
    for _ in range(n_blades):
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        length = float(rng.uniform(10.0, 24.0))
        bend = float(rng.uniform(-0.6, 0.6))
        shade = float(rng.uniform(-0.05, 0.05))
        color = (0.16 + shade, 0.48 + shade, 0.14 + shade, 0.82 + shade)
        p = (plant.x + float(rng.uniform(-2.0, 2.0)), plant.y + float(rng.uniform(-2.0, 2.0)))
        seg = 4
        for k in range(seg):
            a = ang + bend * (k / seg)
            q = (p[0] + (length / seg) * math.cos(a), p[1] + (length / seg) * math.sin(a))
            _paint_capsule(rgbn, wx, wy, p, q, 1.1, color)
            p = q


def render_views(field: FieldTruth, appearance_seed: int | None = None):
    """Render one 4-channel image (RGB + NIR) per trajectory pose.

    Returns a list of ((H, W, 4) float32 array, Annotation) pairs. Plant
    appearance is drawn from `appearance_seed` (default: derived from the
    field seed), independently per plant, so a second run over the same field
    regenerates leaf arrangements without moving any SEP.
    """
    config = field.config
    if appearance_seed is None:
        appearance_seed = config.rng_seed + 1
    cam = config.camera()
    size = config.image_size
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)

    results = []
    for index, (t, px, py, theta) in enumerate(field.true_poses):
        pose = Pose2D(px, py, theta, np.zeros((3, 3)))
        c, s = math.cos(theta), math.sin(theta)
        ox = (xs - cam.cx) / cam.focal_px * cam.height_mm
        oy = (ys - cam.cy) / cam.focal_px * cam.height_mm
        wx = px + c * ox - s * oy
        wy = py + s * ox + c * oy

        noise = _soil_noise(wx, wy, config.rng_seed)
        rgbn = np.empty((size, size, 4), dtype=np.float64)
        rgbn[..., 0] = 0.34 + 0.10 * (noise - 0.5)
        rgbn[..., 1] = 0.27 + 0.08 * (noise - 0.5)
        rgbn[..., 2] = 0.19 + 0.06 * (noise - 0.5)
        rgbn[..., 3] = 0.16 + 0.10 * (noise - 0.5)   # soil is NIR-dark

        half = config.footprint_mm / 2.0 + 40.0
        seps: list[SepPoint] = []
        regions: list[RegionAnnotation] = []
        for p_idx, plant in enumerate(field.plants):
            if abs(plant.x - px) > half or abs(plant.y - py) > half:
                continue
            rng = np.random.default_rng([appearance_seed, p_idx])
            if plant.species == "crop":
                _render_crop(rgbn, wx, wy, plant, config.growth_stage, rng)
            else:
                _render_weed(rgbn, wx, wy, plant, rng)

            u, v = world_to_pixel(plant.x, plant.y, pose, cam)
            if not (0 <= u < size and 0 <= v < size):
                continue
            if plant.species == "crop":
                seps.append(SepPoint(u, v, "crop"))
            else:
                poly_px = tuple(world_to_pixel(qx, qy, pose, cam) for qx, qy in plant.polygon)
                if all(0 <= qu < size and 0 <= qv < size for qu, qv in poly_px):
                    regions.append(RegionAnnotation(poly_px, "weed"))
                else:
                    seps.append(SepPoint(u, v, "weed"))

        image = np.clip(rgbn, 0.0, 1.0).astype(np.float32)
        annotation = Annotation(image_id=f"img_{index:04d}", seps=tuple(seps),
                                regions=tuple(regions))
        results.append((image, annotation))
    return results


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def save_field_truth(path, field: FieldTruth) -> None:
    doc = {
        "config": {k: getattr(field.config, k) for k in (
            "n_images", "image_size", "ground_res_mm", "camera_height_mm",
            "pose_step_mm", "pose_dt_s", "field_width_mm", "row_spacing_mm",
            "plant_spacing_mm", "row_jitter_mm", "growth_stage",
            "weed_density_per_m2", "gnss_sigma_mm", "odo_sigma_per_mm",
            "odo_sigma_per_rad", "rng_seed")},
        "plants": [
            {"species": p.species, "x_mm": p.x, "y_mm": p.y, "extent_mm": p.extent_mm,
             "polygon_mm": [[qx, qy] for qx, qy in p.polygon]}
            for p in field.plants],
        "true_poses": [[t, x, y, th] for t, x, y, th in field.true_poses],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_field_truth(path) -> FieldTruth:
    """Rebuild a FieldTruth from its manifest (regenerates sensor streams)."""
    doc = json.loads(Path(path).read_text())
    config = FieldConfig(**doc["config"])
    plants = tuple(
        Plant(p["species"], p["x_mm"], p["y_mm"], p["extent_mm"],
              tuple((qx, qy) for qx, qy in p["polygon_mm"]))
        for p in doc["plants"])
    poses = tuple((t, x, y, th) for t, x, y, th in doc["true_poses"])
    fixes, odometry = corrupt_sensors(
        poses, config.gnss_sigma_mm, config.odo_sigma_per_mm,
        config.odo_sigma_per_rad, rng_seed=[config.rng_seed, 0x5E45])
    return FieldTruth(config, plants, poses, fixes, odometry)
