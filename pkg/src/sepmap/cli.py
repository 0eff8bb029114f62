"""Command-line interface.

Subcommands mirror the pipeline stages: gen, gt, train, infer, extract, eval,
map, compare, and e2e for the whole chain. Options resolve as flags > config
file > built-in defaults; the config file is a flat TOML-style file of
``key = value`` lines with optional ``[subcommand]`` sections.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fcnn
from .evaluation import average_precision, mean_accepted_distance_pooled, pr_curve_pooled
from .extraction import detections_from_json, detections_to_csv, detections_to_json, extract_seps
from .geomap import (CameraConfig, compare_maps, landmarks_from_csv, landmarks_to_csv,
                     build_map, trajectory_from_csv)
from .groundtruth import load_annotation, make_groundtruth
from .pipeline import E2EConfig, _central, _estimate_poses, pr_csv, run_e2e, run_map_repro
from .raster_io import read_lkm, read_pgm, read_ppm, write_lkm
from .synthfield import FieldConfig, FieldTruth, generate_field, render_views
from .svgplot import histogram_plot, line_plot


def parse_config_file(path) -> dict:
    """Flat TOML-subset parser: sections, strings, numbers, booleans."""
    values: dict[str, object] = {}
    section = ""
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        value = value.split("#", 1)[0].strip()
        if value.startswith('"') and value.endswith('"') and len(value) >= 2:
            parsed: object = value[1:-1]
        elif value in ("true", "false"):
            parsed = value == "true"
        else:
            try:
                parsed = int(value)
            except ValueError:
                try:
                    parsed = float(value)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: cannot parse value {value!r}") from None
        values[f"{section}.{key}" if section else key] = parsed
    return values


class _Options:
    """flags > config file > defaults, per subcommand."""

    def __init__(self, args: argparse.Namespace, command: str):
        self.args = args
        self.command = command
        self.config = parse_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        for key in (f"{self.command}.{name}", name):
            if key in self.config:
                return type(default)(self.config[key]) if default is not None else self.config[key]
        return default


def _load_image_stack(images_dir: Path, image_id: str) -> np.ndarray:
    rgb = read_ppm(images_dir / f"{image_id}.ppm").data
    nir = read_pgm(images_dir / f"{image_id}_nir.pgm").plane(0)
    return np.concatenate([rgb, nir[:, :, None]], axis=2)


def _prep(image_hwc: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image_hwc.transpose(2, 0, 1) - np.float32(0.5))


def _parse_thresholds(text: str) -> list[float]:
    """Either a single number or start:stop:step (inclusive stop)."""
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        out = []
        t = start
        while t <= stop + 1e-9:
            out.append(round(t, 9))
            t += step
        return out
    return [float(text)]


def _info(opts, message: str) -> None:
    if not getattr(opts.args, "quiet", False):
        print(message)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_gen(opts: _Options) -> int:
    from .geomap import trajectory_to_csv
    from .groundtruth import save_annotation
    from .raster_io import write_pgm, write_ppm
    from .synthfield import save_field_truth

    out = Path(opts.get("out", "field"))
    config = FieldConfig(
        n_images=opts.get("images", 250),
        image_size=opts.get("size", 64),
        growth_stage=opts.get("stage", "mid"),
        weed_density_per_m2=opts.get("weed_density", 8.0),
        rng_seed=opts.get("seed", 0),
    )
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    field = generate_field(config)
    save_field_truth(out / "field_truth.json", field)
    (out / "trajectory.csv").write_text(trajectory_to_csv(field.odometry, field.gnss_fixes))
    for image, ann in render_views(field):
        write_ppm(out / "images" / f"{ann.image_id}.ppm", image[:, :, :3])
        write_pgm(out / "images" / f"{ann.image_id}_nir.pgm", image[:, :, 3])
        save_annotation(out / "annotations" / f"{ann.image_id}.json", ann)
    _info(opts, f"generated {config.n_images} views, {len(field.plants)} plants -> {out}")
    return 0


def _cmd_gt(opts: _Options) -> int:
    ann_dir = Path(opts.get("annotations", "field/annotations"))
    out = Path(opts.get("out", "field/gt"))
    sigma = opts.get("sigma", 17.0)
    width = opts.get("width", 64)
    height = opts.get("height", 64)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in sorted(ann_dir.glob("*.json")):
        ann = load_annotation(path)
        gt = make_groundtruth(ann, width, height, sigma)
        write_lkm(out / f"{ann.image_id}.lkm", gt.plane())
        count += 1
    _info(opts, f"wrote {count} likelihood maps (sigma {sigma} px) -> {out}")
    return 0


def _cmd_train(opts: _Options) -> int:
    data = Path(opts.get("data", "field"))
    out = Path(opts.get("out", "weights.sepn"))
    config = fcnn.TrainConfig(
        learning_rate=opts.get("lr", 1e-5),
        batch_size=opts.get("batch", 4),
        iterations=opts.get("iterations", 2000),
        momentum=opts.get("momentum", 0.9),
        rng_seed=opts.get("seed", 0),
    )
    dataset = []
    for gt_path in sorted((data / "gt").glob("*.lkm")):
        image_id = gt_path.stem
        image = _load_image_stack(data / "images", image_id)
        target = read_lkm(gt_path).plane(0)
        dataset.append((_prep(image), target[None]))
    if not dataset:
        raise ValueError(f"no training pairs under {data}")
    h, w = dataset[0][1].shape[-2:]
    net = fcnn.Network(fcnn.default_toy_spec(4, h, w), rng_seed=config.rng_seed)
    net, losses = fcnn.train(net, dataset, config)
    fcnn.save_network(out, net)
    loss_csv = opts.get("loss_csv", "")
    if loss_csv:
        Path(loss_csv).write_text(
            "iteration,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(losses)))
    _info(opts, f"trained {config.iterations} iterations on {len(dataset)} pairs; "
                f"final loss {losses[-1]:.3f} -> {out}")
    return 0


def _cmd_infer(opts: _Options) -> int:
    net = fcnn.load_network(opts.get("weights", "weights.sepn"))
    images_dir = Path(opts.get("images", "field/images"))
    out = Path(opts.get("out", "pred"))
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for ppm in sorted(images_dir.glob("*.ppm")):
        image_id = ppm.stem
        stack = _load_image_stack(images_dir, image_id)
        pred = fcnn.forward(net, _prep(stack))[0]
        write_lkm(out / f"{image_id}.lkm", pred)
        count += 1
    _info(opts, f"predicted {count} likelihood maps -> {out}")
    return 0


def _cmd_extract(opts: _Options) -> int:
    maps_dir = Path(opts.get("maps", "pred"))
    out = Path(opts.get("out", "detections"))
    min_area = opts.get("min_area", 3)
    scoring = opts.get("scoring", "mean")
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for lkm in sorted(maps_dir.glob("*.lkm")):
        dets = extract_seps(read_lkm(lkm).plane(0), min_region_area=min_area, scoring=scoring)
        (out / f"{lkm.stem}.json").write_text(detections_to_json(dets))
        (out / f"{lkm.stem}.csv").write_text(detections_to_csv(dets))
        count += 1
    _info(opts, f"extracted detections for {count} maps -> {out}")
    return 0


def _cmd_eval(opts: _Options) -> int:
    det_dir = Path(opts.get("detections", "detections"))
    ann_dir = Path(opts.get("annotations", "field/annotations"))
    out = Path(opts.get("out", "eval"))
    thresholds = _parse_thresholds(opts.get("thresholds", "6:18:2"))
    acceptance = opts.get("acceptance", 20.0)
    species = opts.get("species", "")
    out.mkdir(parents=True, exist_ok=True)

    per_image = []
    for det_path in sorted(det_dir.glob("*.json")):
        ann = load_annotation(ann_dir / det_path.name)
        if species:
            seps = [(s.x, s.y) for s in ann.seps if s.species == species]
            from .groundtruth import region_to_sep
            seps += [region_to_sep(r.polygon) for r in ann.regions if r.species == species]
        else:
            seps = ann.all_seps()
        per_image.append((detections_from_json(det_path), seps))
    if not per_image:
        raise ValueError(f"no detection files under {det_dir}")

    curves = {t: pr_curve_pooled(per_image, t) for t in thresholds}
    for t, curve in curves.items():
        (out / f"pr_t{t:g}.csv").write_text(pr_csv(curve))
    line_plot(out / "pr.svg",
              [([r for _, _, r in c.points], [p for _, p, _ in c.points], f"{t:g} px")
               for t, c in sorted(curves.items())],
              xlabel="recall", ylabel="precision", title="SEP localization")
    mad, ap_acc = mean_accepted_distance_pooled(per_image, acceptance)
    summary = {
        "ap": average_precision(curves[min(curves)]),
        "threshold_px": float(min(curves)),
        "ap_by_threshold_px": {f"{t:g}": average_precision(c) for t, c in sorted(curves.items())},
        "mad_px": mad,
        "ap_at_acceptance": ap_acc,
        "acceptance_px": acceptance,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    if getattr(opts.args, "json", False):
        print(json.dumps(summary))
    else:
        _info(opts, f"AP@{min(curves):g}px {summary['ap']:.3f}  "
                    f"MAD {mad if mad is None else round(mad, 3)} px  "
                    f"AP@{acceptance:g}px {ap_acc:.3f} -> {out}")
    return 0


def _cmd_map(opts: _Options) -> int:
    from .synthfield import load_field_truth

    det_dir = Path(opts.get("detections", "detections"))
    trajectory = Path(opts.get("trajectory", "field/trajectory.csv"))
    out = Path(opts.get("out", "landmarks.csv"))
    merge_radius = opts.get("merge_radius", 7.9)
    border = opts.get("border", 12)

    manifest = opts.get("field", "")
    if manifest:
        field = load_field_truth(manifest)
        cam = field.config.camera()
        size = field.config.image_size
    else:
        size = opts.get("size", 64)
        c = (size - 1) / 2.0
        cam = CameraConfig(
            focal_px=opts.get("focal", 500.0),
            cx=opts.get("cx", c), cy=opts.get("cy", c),
            height_mm=opts.get("height_mm", 1000.0))

    odometry, fixes = trajectory_from_csv(trajectory.read_text())
    poses = _estimate_poses(fixes, odometry)
    det_files = sorted(det_dir.glob("*.json"))
    frames = []
    for path in det_files:
        index = int("".join(ch for ch in path.stem if ch.isdigit()) or 0)
        if index >= len(poses):
            raise ValueError(f"{path.name}: no pose #{index} in {trajectory}")
        frames.append((_central(detections_from_json(path), size, border), poses[index]))
    landmark_map = build_map(frames, cam, merge_radius=merge_radius)
    out.write_text(landmarks_to_csv(landmark_map))
    _info(opts, f"{len(landmark_map)} landmarks from {len(det_files)} frames -> {out}")
    return 0


def _cmd_compare(opts: _Options) -> int:
    earlier = landmarks_from_csv(Path(opts.get("earlier", "landmarks_a.csv")).read_text())
    later = landmarks_from_csv(Path(opts.get("later", "landmarks_b.csv")).read_text())
    acceptance_opt = opts.get("acceptance", "auto")
    acceptance = acceptance_opt if acceptance_opt == "auto" else float(acceptance_opt)
    out = Path(opts.get("out", "compare.json"))
    report = compare_maps(earlier, later, acceptance)
    out.write_text(report.to_json())
    hist = opts.get("histogram", "")
    if hist:
        histogram_plot(hist, report.errors, xlabel="error [mm]",
                       title="landmark match errors")
    summary = {"matched": report.matched, "recall": report.recall,
               "precision": report.precision, "mean_error_mm": report.mean_distance,
               "acceptance_mm": report.acceptance}
    if getattr(opts.args, "json", False):
        print(json.dumps(summary))
    else:
        _info(opts, f"matched {report.matched} (recall {report.recall:.1%}, "
                    f"precision {report.precision:.1%}), mean error "
                    f"{report.mean_distance:.2f} mm @ {report.acceptance:.1f} mm -> {out}")
    return 0


def _cmd_e2e(opts: _Options) -> int:
    out = Path(opts.get("out", "e2e_out"))
    seed = opts.get("seed", 0)
    field_config = FieldConfig(
        n_images=opts.get("images", 250),
        image_size=opts.get("size", 64),
        growth_stage=opts.get("stage", "mid"),
        weed_density_per_m2=opts.get("weed_density", 8.0),
        rng_seed=seed,
    )
    config = E2EConfig(
        field=field_config,
        train_images=opts.get("train_images", 200),
        sigma_px=opts.get("sigma", 5.0),
        train=fcnn.TrainConfig(
            learning_rate=opts.get("lr", 1e-5),
            batch_size=opts.get("batch", 4),
            iterations=opts.get("iterations", 2000),
            momentum=opts.get("momentum", 0.9),
            rng_seed=seed,
        ),
        write_images=not opts.get("no_images", False),
    )
    summary = run_e2e(config, out)
    if not opts.get("skip_repro", False):
        repro = run_map_repro(field_config, out / "repro", sigma_px=config.sigma_px,
                              merge_radius_mm=config.merge_radius_mm)
        summary["repro"] = repro
    if getattr(opts.args, "json", False):
        print(json.dumps(summary))
        return 0
    _info(opts, f"e2e summary ({out}):")
    _info(opts, f"  AP@{summary['threshold_px']:g}px        {summary['ap']:.3f}")
    _info(opts, f"  MAD@{summary['acceptance_px']:g}px       {summary['mad_px']}")
    if "repro" in summary:
        rep = summary["repro"]
        _info(opts, f"  repro matched   {rep['matched']} "
                    f"(recall {rep['recall']:.1%}, precision {rep['precision']:.1%})")
        _info(opts, f"  repro mean err  {rep['mean_error_mm']:.2f} mm "
                    f"@ {rep['acceptance_mm']:.1f} mm")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_COMMANDS = {
    "gen": (_cmd_gen, "generate a synthetic field dataset"),
    "gt": (_cmd_gt, "annotations -> LKM1 likelihood maps"),
    "train": (_cmd_train, "train the regression network"),
    "infer": (_cmd_infer, "weights + images -> predicted likelihood maps"),
    "extract": (_cmd_extract, "likelihood maps -> detection JSON/CSV"),
    "eval": (_cmd_eval, "detections vs annotations -> PR curves, AP, MAD"),
    "map": (_cmd_map, "detections + trajectory -> landmark map CSV"),
    "compare": (_cmd_compare, "compare two landmark maps"),
    "e2e": (_cmd_e2e, "full pipeline on one synthetic field"),
}

_FLAGS = {
    "gen": [("out", str), ("images", int), ("size", int), ("stage", str),
            ("weed-density", float), ("seed", int)],
    "gt": [("annotations", str), ("out", str), ("sigma", float),
           ("width", int), ("height", int)],
    "train": [("data", str), ("out", str), ("lr", float), ("batch", int),
              ("iterations", int), ("momentum", float), ("seed", int),
              ("loss-csv", str)],
    "infer": [("weights", str), ("images", str), ("out", str)],
    "extract": [("maps", str), ("out", str), ("min-area", int), ("scoring", str)],
    "eval": [("detections", str), ("annotations", str), ("out", str),
             ("thresholds", str), ("acceptance", float), ("species", str)],
    "map": [("detections", str), ("trajectory", str), ("out", str),
            ("merge-radius", float), ("border", int), ("field", str),
            ("size", int), ("focal", float), ("cx", float), ("cy", float),
            ("height-mm", float)],
    "compare": [("earlier", str), ("later", str), ("acceptance", str),
                ("out", str), ("histogram", str)],
    "e2e": [("out", str), ("seed", int), ("images", int), ("size", int),
            ("stage", str), ("weed-density", float), ("train-images", int),
            ("sigma", float), ("lr", float), ("batch", int), ("iterations", int),
            ("momentum", float)],
}

_STORE_TRUE = {"e2e": ["no-images", "skip-repro"]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepmap",
        description="Stem-emerging-point localization and landmark mapping pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_handler, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML-style config file (flags override it)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument("--json", action="store_true", help="print the summary as JSON")
        for flag, ftype in _FLAGS[name]:
            p.add_argument(f"--{flag}", type=ftype, default=None)
        for flag in _STORE_TRUE.get(name, []):
            p.add_argument(f"--{flag}", action="store_true", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler, _ = _COMMANDS[args.command]
    try:
        return handler(_Options(args, args.command))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
