"""Independent reference implementations used as test oracles.

Everything here is deliberately naive: brute force over all candidates,
exhaustive threshold search, step-by-step simulation. These stay independent
of the library code paths they check.
"""

from __future__ import annotations

import math

import numpy as np

from sepmap import fcnn
from sepmap.fcnn.layers import Relu, SkipAdd


def brute_force_distance_transform(points, width: int, height: int) -> np.ndarray:
    """Per-pixel minimum over all points, in float64, cast to float32."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    best = np.full((height, width), np.inf)
    for x, y in points:
        np.minimum(best, np.sqrt((xs - round(x)) ** 2 + (ys - round(y)) ** 2), out=best)
    return best.astype(np.float32)


def exhaustive_otsu(values: np.ndarray, bins: int = 256) -> float:
    """Try every interior bin edge, recomputing class stats from scratch."""
    values = np.asarray(values, dtype=np.float64).ravel()
    vmin, vmax = values.min(), values.max()
    hist, edges = np.histogram(values, bins=bins, range=(vmin, vmax))
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = hist.sum()
    best_k, best_var = None, -1.0
    for k in range(1, bins):
        n0, n1 = hist[:k].sum(), hist[k:].sum()
        if n0 == 0 or n1 == 0:
            var = 0.0
        else:
            mu0 = (hist[:k] * centers[:k]).sum() / n0
            mu1 = (hist[k:] * centers[k:]).sum() / n1
            var = (n0 / total) * (n1 / total) * (mu0 - mu1) ** 2
        if var > best_var:
            best_var, best_k = var, k
    return float(edges[best_k])


def greedy_match_simulation(detections, gts, threshold: float):
    """Step-by-step re-simulation of the confidence-ranked greedy matching."""
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    free = set(range(len(gts)))
    tp_flags = [False] * len(detections)
    for i in order:
        det = detections[i]
        best, best_d = None, float("inf")
        for j in sorted(free):
            d = math.hypot(det.x - gts[j][0], det.y - gts[j][1])
            if d < best_d:
                best, best_d = j, d
        if best is not None and best_d <= threshold:
            tp_flags[i] = True
            free.discard(best)
    return tp_flags


def transitive_clusters(points: np.ndarray, radius: float) -> list[list[int]]:
    """Brute-force transitive closure of the 'within radius' relation."""
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if math.dist(points[i], points[j]) < radius:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[rb] = ra
    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    return list(clusters.values())


def finite_difference_check(net, x, target, eps: float = 1e-3):
    """Central finite differences in float64 against analytic gradients.

    Weights whose +-eps perturbation flips any ReLU activation sign are
    excluded (the loss is not differentiable there, so central differences
    are not a valid derivative estimate). Returns (max relative error,
    number skipped, number checked).
    """
    net = net.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)

    def forward_masks(xx):
        cur = xx[None]
        masks = []
        outputs = []
        for layer in net.layers:
            if isinstance(layer, Relu):
                masks.append(cur > 0)
            if isinstance(layer, SkipAdd):
                cur = layer.forward(cur, outputs[layer.from_layer])
            else:
                cur = layer.forward(cur)
            outputs.append(cur)
        return cur[0], masks

    grads = fcnn.backward(net, x, target)
    max_rel, skipped, checked = 0.0, 0, 0
    for p, g in zip(net.params(), grads):
        fp, fg = p.ravel(), g.ravel()
        for i in range(fp.size):
            old = fp[i]
            fp[i] = old + eps
            y_plus, masks_plus = forward_masks(x)
            fp[i] = old - eps
            y_minus, masks_minus = forward_masks(x)
            fp[i] = old
            if any((a != b).any() for a, b in zip(masks_plus, masks_minus)):
                skipped += 1
                continue
            num = (fcnn.loss(y_plus, target) - fcnn.loss(y_minus, target)) / (2 * eps)
            rel = abs(num - fg[i]) / max(abs(num), abs(fg[i]), 1e-8)
            max_rel = max(max_rel, rel)
            checked += 1
    return max_rel, skipped, checked
