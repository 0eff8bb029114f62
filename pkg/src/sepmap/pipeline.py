"""End-to-end pipeline plumbing shared by the CLI and the acceptance suite.

Two entry points: `run_e2e` drives generate -> ground truth -> train -> infer
-> extract -> evaluate (-> map) on one synthetic field; `run_map_repro`
simulates two mapping runs over the same field with regenerated plant
appearance and independent sensor noise, then compares the landmark maps.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fcnn
from .evaluation import average_precision, mean_accepted_distance_pooled, pr_curve_pooled
from .extraction import detections_to_json, extract_seps
from .geomap import (LandmarkMap, Pose2D, UkfParams, average_fixes, build_map,
                     compare_maps, landmarks_to_csv, trajectory_to_csv,
                     ukf_predict, ukf_update)
from .groundtruth import make_groundtruth, save_annotation
from .raster_io import write_lkm, write_pgm, write_ppm
from .synthfield import FieldConfig, FieldTruth, corrupt_sensors, generate_field, \
    render_views, save_field_truth

__all__ = ["E2EConfig", "run_e2e", "run_map_repro", "ukf_trajectory", "pr_csv"]


def _central(detections, size: int, margin: int):
    """Detections at least `margin` px from every image border. Mapping only
    trusts central sightings: a peak clipped by the frame edge pulls its
    centroid inward, and the sweep guarantees a central sighting of every
    plant anyway."""
    lo, hi = margin, size - 1 - margin
    return [d for d in detections if lo <= d.x <= hi and lo <= d.y <= hi]


@dataclass(frozen=True)
class E2EConfig:
    field: FieldConfig = dataclasses.field(default_factory=FieldConfig)
    train_images: int = 200
    sigma_px: float = 5.0
    train: fcnn.TrainConfig = dataclasses.field(default_factory=lambda: fcnn.TrainConfig(
        learning_rate=1e-5, batch_size=4, iterations=2000, momentum=0.9, rng_seed=0))
    thresholds_px: tuple = (6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0)
    acceptance_px: float = 20.0
    merge_radius_mm: float = 7.9
    map_border_px: int = 12
    write_images: bool = True

    def __post_init__(self):
        if not (0 < self.train_images < self.field.n_images):
            raise ValueError("train_images must leave at least one held-out image")


def _prep_input(image_hwc: np.ndarray) -> np.ndarray:
    """(H, W, 4) [0,1] image to the zero-centered (C, H, W) network input."""
    return np.ascontiguousarray(image_hwc.transpose(2, 0, 1) - np.float32(0.5))


def ukf_trajectory(odometry, fixes, initial: Pose2D,
                   params: UkfParams = UkfParams()) -> list[Pose2D]:
    """One filtered pose per odometry step; fixes matched by timestamp."""
    by_time = {f.timestamp: f for f in fixes}
    pose = initial
    out = []
    for odo in odometry:
        pose = ukf_predict(pose, odo, params)
        fix = by_time.get(odo.timestamp)
        if fix is not None:
            pose = ukf_update(pose, fix, params)
        out.append(pose)
    return out


def _estimate_poses(fixes, odometry) -> list[Pose2D]:
    """Filtered pose per frame: fix averaging, then UKF over the full run.
    The run starts at the first smoothed fix, heading along +x by convention
    (heading is not observable from position fixes until the robot moves)."""
    smoothed = average_fixes(fixes, odometry)
    first = smoothed[0] if smoothed else fixes[0]
    initial = Pose2D(first.x, first.y, 0.0,
                     np.diag([first.sigma ** 2, first.sigma ** 2, 0.03 ** 2]))
    return ukf_trajectory(odometry, smoothed, initial)


def pr_csv(curve) -> str:
    lines = ["cutoff,precision,recall"]
    lines += [f"{c!r},{p!r},{r!r}" for c, p, r in curve.points]
    return "\n".join(lines) + "\n"


def run_e2e(config: E2EConfig, outdir) -> dict:
    """Full synthetic benchmark; returns the metrics summary (also on disk)."""
    from .svgplot import line_plot

    out = Path(outdir)
    for sub in ("images", "annotations", "gt", "pred", "detections", "eval", "map"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    field_truth = generate_field(config.field)
    save_field_truth(out / "field_truth.json", field_truth)
    (out / "trajectory.csv").write_text(
        trajectory_to_csv(field_truth.odometry, field_truth.gnss_fixes))
    views = render_views(field_truth)

    size = config.field.image_size
    for image, ann in views:
        save_annotation(out / "annotations" / f"{ann.image_id}.json", ann)
        if config.write_images:
            write_ppm(out / "images" / f"{ann.image_id}.ppm", image[:, :, :3])
            write_pgm(out / "images" / f"{ann.image_id}_nir.pgm", image[:, :, 3])

    train_views = views[:config.train_images]
    test_views = views[config.train_images:]

    dataset = []
    for image, ann in train_views:
        gt = make_groundtruth(ann, size, size, config.sigma_px)
        write_lkm(out / "gt" / f"{ann.image_id}.lkm", gt.plane())
        dataset.append((_prep_input(image), gt.plane()[None]))

    net = fcnn.Network(fcnn.default_toy_spec(4, size, size),
                       rng_seed=config.train.rng_seed)
    net, losses = fcnn.train(net, dataset, config.train)
    fcnn.save_network(out / "weights.sepn", net)
    (out / "train_loss.csv").write_text(
        "iteration,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(losses)))

    per_image = []
    detections_by_index = {}
    for offset, (image, ann) in enumerate(test_views):
        pred = fcnn.forward(net, _prep_input(image))[0]
        write_lkm(out / "pred" / f"{ann.image_id}.lkm", pred)
        dets = extract_seps(pred)
        (out / "detections" / f"{ann.image_id}.json").write_text(detections_to_json(dets))
        detections_by_index[config.train_images + offset] = dets
        per_image.append((dets, ann.all_seps()))

    curves = {t: pr_curve_pooled(per_image, t) for t in config.thresholds_px}
    for t, curve in curves.items():
        (out / "eval" / f"pr_t{int(t):02d}.csv").write_text(pr_csv(curve))
    line_plot(out / "eval" / "pr.svg",
              [([r for _, _, r in c.points], [p for _, p, _ in c.points], f"{t:g} px")
               for t, c in sorted(curves.items())],
              xlabel="recall", ylabel="precision", title="SEP localization")
    mad, ap_acceptance = mean_accepted_distance_pooled(per_image, config.acceptance_px)

    # Landmark map from the held-out detections over the filtered trajectory.
    poses = _estimate_poses(field_truth.gnss_fixes, field_truth.odometry)
    frames = [(_central(dets, size, config.map_border_px), poses[idx])
              for idx, dets in detections_by_index.items()]
    landmark_map = build_map(frames, config.field.camera(),
                             merge_radius=config.merge_radius_mm, run_id="e2e")
    (out / "map" / "landmarks.csv").write_text(landmarks_to_csv(landmark_map))

    summary = {
        "train_images": config.train_images,
        "test_images": len(test_views),
        "iterations": config.train.iterations,
        "final_loss": losses[-1] if losses else None,
        "ap_by_threshold_px": {f"{t:g}": average_precision(c) for t, c in sorted(curves.items())},
        "ap": average_precision(curves[min(curves)]),
        "threshold_px": float(min(curves)),
        "mad_px": mad,
        "ap_at_acceptance": ap_acceptance,
        "acceptance_px": config.acceptance_px,
        "landmarks": len(landmark_map),
    }
    (out / "eval" / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return summary


# ---------------------------------------------------------------------------
# Two-run mapping reproducibility simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _MappingRun:
    landmark_map: LandmarkMap
    csv_text: str


def _simulate_mapping_run(field: FieldTruth, sigma_px: float, merge_radius: float,
                          appearance_seed: int, sensor_seed: int,
                          drop_weed_fraction: float = 0.0, run_id: str = "",
                          border_px: int = 12) -> _MappingRun:
    """One mapping pass over a field: ideal per-image likelihood maps (stand-in
    for a trained regressor), peak extraction, UKF poses, landmark merging."""
    config = field.config
    if drop_weed_fraction > 0:
        rng = np.random.default_rng([sensor_seed, 0xDEAD])
        plants = tuple(p for p in field.plants
                       if p.species == "crop" or rng.random() >= drop_weed_fraction)
        field = FieldTruth(config, plants, field.true_poses, field.gnss_fixes,
                           field.odometry)
    fixes, odometry = corrupt_sensors(
        field.true_poses, config.gnss_sigma_mm, config.odo_sigma_per_mm,
        config.odo_sigma_per_rad, rng_seed=[sensor_seed, 0x5E45])
    poses = _estimate_poses(fixes, odometry)

    size = config.image_size
    views = render_views(field, appearance_seed=appearance_seed)
    frames = []
    for idx, (_image, ann) in enumerate(views):
        if not ann.seps and not ann.regions:
            continue
        ideal = make_groundtruth(ann, size, size, sigma_px)
        dets = _central(extract_seps(ideal.plane()), size, border_px)
        frames.append((dets, poses[idx]))
    landmark_map = build_map(frames, config.camera(), merge_radius=merge_radius,
                             run_id=run_id)
    return _MappingRun(landmark_map, landmarks_to_csv(landmark_map))


def run_map_repro(field_config: FieldConfig, outdir, sigma_px: float = 5.0,
                  merge_radius_mm: float = 7.9, drop_weed_fraction: float = 0.0,
                  run_seeds: tuple = (101, 202)) -> dict:
    """Two simulated mapping runs over one field, compared at auto-3-sigma."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    field = generate_field(field_config)

    run_a = _simulate_mapping_run(field, sigma_px, merge_radius_mm,
                                  appearance_seed=run_seeds[0], sensor_seed=run_seeds[0],
                                  run_id="run_a")
    run_b = _simulate_mapping_run(field, sigma_px, merge_radius_mm,
                                  appearance_seed=run_seeds[1], sensor_seed=run_seeds[1],
                                  drop_weed_fraction=drop_weed_fraction, run_id="run_b")
    (out / "landmarks_a.csv").write_text(run_a.csv_text)
    (out / "landmarks_b.csv").write_text(run_b.csv_text)

    report = compare_maps(run_a.landmark_map, run_b.landmark_map, acceptance="auto")
    (out / "compare.json").write_text(report.to_json())
    from .svgplot import histogram_plot
    histogram_plot(out / "errors.svg", report.errors, xlabel="error [mm]",
                   title="landmark match errors")
    summary = {
        "landmarks_a": len(run_a.landmark_map),
        "landmarks_b": len(run_b.landmark_map),
        "matched": report.matched,
        "recall": report.recall,
        "precision": report.precision,
        "mean_error_mm": report.mean_distance,
        "acceptance_mm": report.acceptance,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return summary
