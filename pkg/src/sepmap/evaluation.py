"""Detection evaluation: confidence-ranked greedy matching, PR curves, AP, MAD.

Detections are processed in confidence-descending order; each one may consume
at most one ground-truth point, its nearest still-unmatched one, and counts as
a true positive when that distance is within the threshold (ties at the
threshold accept). Curves sweep a confidence cutoff over the distinct
detection scores; AP integrates the all-points precision envelope over recall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MatchOutcome", "PrCurve", "match", "pr_curve", "pr_curve_pooled",
           "average_precision", "mean_accepted_distance", "mean_accepted_distance_pooled"]


@dataclass(frozen=True)
class MatchOutcome:
    """Per-detection and per-GT results of one matching pass.

    Detection-indexed lists follow the input detection order; `det_matched_gt`
    is the consumed GT index for true positives and None for false positives.
    """

    det_is_tp: tuple
    det_matched_gt: tuple
    det_distance: tuple
    gt_matched: tuple

    @property
    def tp_count(self) -> int:
        return sum(self.det_is_tp)

    def tp_distances(self) -> list[float]:
        return [d for d, tp in zip(self.det_distance, self.det_is_tp) if tp]


@dataclass(frozen=True)
class PrCurve:
    """(confidence cutoff, precision, recall) points at one distance threshold."""

    points: tuple
    threshold: float
    gt_count: int = 0


def _confidence_order(detections) -> list[int]:
    # Stable sort: ties keep input order, so any strictly increasing rescoring
    # of the confidences leaves the processing order unchanged.
    return sorted(range(len(detections)), key=lambda i: -detections[i].confidence)


def match(detections, gts, threshold: float) -> MatchOutcome:
    """Greedy one-to-one matching of detections against ground-truth SEPs."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    gts = [(float(x), float(y)) for x, y in gts]
    n = len(detections)
    is_tp = [False] * n
    matched_gt: list[int | None] = [None] * n
    distance: list[float | None] = [None] * n
    gt_free = [True] * len(gts)

    for i in _confidence_order(detections):
        det = detections[i]
        best_j, best_d = None, math.inf
        for j, (gx, gy) in enumerate(gts):
            if not gt_free[j]:
                continue
            d = math.hypot(det.x - gx, det.y - gy)
            if d < best_d:
                best_j, best_d = j, d
        if best_j is not None and best_d <= threshold:
            is_tp[i] = True
            matched_gt[i] = best_j
            distance[i] = best_d
            gt_free[best_j] = False
        else:
            distance[i] = None if best_j is None else best_d
    return MatchOutcome(tuple(is_tp), tuple(matched_gt), tuple(distance),
                        tuple(not f for f in gt_free))


def pr_curve(detections, gts, threshold: float) -> PrCurve:
    """Precision/recall as the confidence cutoff sweeps the detection scores."""
    return pr_curve_pooled([(detections, gts)], threshold)


def pr_curve_pooled(per_image, threshold: float) -> PrCurve:
    """PR curve over several images: per-image matching, pooled TP/FP counts.

    `per_image` is a list of (detections, gts) pairs. Within one image a
    detection's TP flag does not depend on lower-scored detections, so the
    pooled sweep equals re-matching every retained subset.
    """
    total_gt = sum(len(gts) for _, gts in per_image)
    if total_gt == 0:
        raise ValueError("no ground truth")
    records = []  # (confidence, is_tp)
    for dets, gts in per_image:
        if not dets:
            continue
        outcome = match(dets, gts, threshold) if gts else None
        for i, det in enumerate(dets):
            is_tp = outcome.det_is_tp[i] if outcome else False
            records.append((det.confidence, is_tp))
    records.sort(key=lambda r: -r[0])

    points = []
    tp = fp = 0
    idx = 0
    while idx < len(records):
        cutoff = records[idx][0]
        while idx < len(records) and records[idx][0] == cutoff:
            if records[idx][1]:
                tp += 1
            else:
                fp += 1
            idx += 1
        precision = tp / (tp + fp)
        recall = tp / total_gt
        points.append((cutoff, precision, recall))
    return PrCurve(tuple(points), float(threshold), total_gt)


def average_precision(curve: PrCurve) -> float:
    """Area under the PR curve via the all-points precision envelope."""
    if not curve.points:
        return 0.0
    pts = sorted((r, p) for _, p, r in curve.points)
    recalls = [r for r, _ in pts]
    precisions = [p for _, p in pts]
    # Envelope: p_interp(r) = max over r' >= r of p(r').
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, precisions):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def mean_accepted_distance(detections, gts, acceptance: float = 20.0):
    """(MAD, AP) at the acceptance radius; MAD is None when nothing matched."""
    return mean_accepted_distance_pooled([(detections, gts)], acceptance)


def mean_accepted_distance_pooled(per_image, acceptance: float = 20.0):
    if acceptance <= 0:
        raise ValueError(f"acceptance must be positive, got {acceptance}")
    distances = []
    for dets, gts in per_image:
        if dets and gts:
            distances.extend(match(dets, gts, acceptance).tp_distances())
    ap = average_precision(pr_curve_pooled(per_image, acceptance))
    mad = float(np.mean(distances)) if distances else None
    return mad, ap
