"""Raster container and the pixel-level primitives the SEP pipeline is built on.

Coordinate convention (used everywhere in this package): pixel centers sit at
integer coordinates, x is the column index and y is the row index. Arrays are
indexed ``[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MultiChannelRaster",
    "LabeledRegions",
    "distance_transform",
    "otsu_threshold",
    "connected_components",
    "weighted_centroid",
    "as_plane",
]


@dataclass(frozen=True)
class MultiChannelRaster:
    """Row-major float32 raster with channel-interleaved pixels, shape (H, W, C)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"raster data must be 2-D or 3-D, got shape {self.data.shape}")
        if arr.size == 0:
            raise ValueError("raster must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("raster contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def plane(self, c: int = 0) -> np.ndarray:
        """Single channel as an (H, W) float32 array."""
        return self.data[:, :, c]


def as_plane(raster) -> np.ndarray:
    """Coerce a single-channel raster (or bare 2-D array) to an (H, W) array."""
    if isinstance(raster, MultiChannelRaster):
        if raster.channels != 1:
            raise ValueError(f"expected a single-channel raster, got {raster.channels} channels")
        return raster.plane(0)
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LabeledRegions:
    """Connected-component labeling: 0 is background, labels are dense in 1..region_count."""

    labels: np.ndarray  # (H, W) int32
    region_count: int

    def pixels(self, label: int) -> np.ndarray:
        """Pixels of one region as an (N, 2) array of (x, y)."""
        ys, xs = np.nonzero(self.labels == label)
        return np.stack([xs, ys], axis=1)


# ---------------------------------------------------------------------------
# Euclidean distance transform
# ---------------------------------------------------------------------------


def distance_transform(points, width: int, height: int) -> MultiChannelRaster:
    """Exact Euclidean distance to the nearest seed point, for every pixel.

    Two-pass separable squared-distance transform: a per-column sweep gives the
    vertical distance to the nearest seed in each column, then a per-row
    lower-envelope pass over shifted parabolas completes the 2-D transform.
    Exact up to float32 rounding of the final square root.

    Args:
        points: iterable of (x, y) pixel coordinates; rounded to the pixel grid.
        width, height: raster dimensions.

    Returns:
        Single-channel raster of distances in pixels.
    """
    pts = list(points)
    if not pts:
        raise ValueError("no SEPs")
    seed = np.zeros((height, width), dtype=bool)
    for x, y in pts:
        xi, yi = int(round(float(x))), int(round(float(y)))
        if not (0 <= xi < width and 0 <= yi < height):
            raise ValueError(f"point ({x}, {y}) outside raster {width}x{height}")
        seed[yi, xi] = True

    # Pass 1: per column, squared distance to the nearest seed in that column.
    # Columns with no seed keep a sentinel larger than any true distance, which
    # keeps the envelope pass in finite arithmetic without affecting minima.
    big = width + height + 1
    col = np.full((height, width), big, dtype=np.int64)
    col[seed] = 0
    for y in range(1, height):
        np.minimum(col[y], col[y - 1] + 1, out=col[y])
    for y in range(height - 2, -1, -1):
        np.minimum(col[y], col[y + 1] + 1, out=col[y])
    g = col.astype(np.float64) ** 2

    # Pass 2: per row, lower envelope of parabolas x -> g[x'] + (x - x')^2.
    sq = np.empty_like(g)
    for y in range(height):
        sq[y] = _envelope_1d(g[y])

    return MultiChannelRaster(np.sqrt(sq).astype(np.float32))


def _envelope_1d(f: np.ndarray) -> np.ndarray:
    """1-D squared-distance transform of a sampled function (lower envelope)."""
    n = f.shape[0]
    out = np.empty(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.intp)      # parabola apex positions
    z = np.empty(n + 1, dtype=np.float64)  # envelope breakpoints
    k = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        out[q] = (q - p) * (q - p) + f[p]
    return out


# ---------------------------------------------------------------------------
# Otsu thresholding
# ---------------------------------------------------------------------------


def otsu_threshold(raster, bins: int = 256) -> float:
    """Histogram threshold maximizing between-class variance.

    The histogram uses `bins` uniform bins over [min, max] of the map; candidate
    thresholds are interior bin edges, classes are the bins strictly below /
    at-or-above the edge, and ties resolve to the lowest edge.
    """
    values = as_plane(raster).astype(np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty map")
    vmin, vmax = float(values.min()), float(values.max())
    if vmin == vmax:
        raise ValueError("degenerate histogram")

    hist, edges = np.histogram(values, bins=bins, range=(vmin, vmax))
    centers = 0.5 * (edges[:-1] + edges[1:])
    counts = hist.astype(np.float64)
    total = counts.sum()

    w0 = np.cumsum(counts)[:-1]                       # mass strictly below edge k
    w1 = total - w0
    m = np.cumsum(counts * centers)
    mu0 = np.divide(m[:-1], w0, out=np.zeros_like(w0), where=w0 > 0)
    mu1 = np.divide(m[-1] - m[:-1], w1, out=np.zeros_like(w1), where=w1 > 0)
    sigma_b = w0 / total * w1 / total * (mu0 - mu1) ** 2

    k = int(np.argmax(sigma_b))  # argmax returns the first (lowest) maximizer
    return float(edges[k + 1])


# ---------------------------------------------------------------------------
# Connected components
# ---------------------------------------------------------------------------


def connected_components(mask: np.ndarray, connectivity: int = 8) -> LabeledRegions:
    """Label connected regions of set pixels; labels dense from 1 in scan order."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent: list[int] = [0]

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(a: int, b: int) -> int:
        ra, rb = find(a), find(b)
        if ra == rb:
            return ra
        if rb < ra:
            ra, rb = rb, ra
        parent[rb] = ra
        return ra

    next_label = 1
    for y in range(h):
        row = mask[y]
        for x in range(w):
            if not row[x]:
                continue
            neigh = []
            if x > 0 and row[x - 1]:
                neigh.append(labels[y, x - 1])
            if y > 0:
                up = labels[y - 1]
                if mask[y - 1, x]:
                    neigh.append(up[x])
                if connectivity == 8:
                    if x > 0 and mask[y - 1, x - 1]:
                        neigh.append(up[x - 1])
                    if x + 1 < w and mask[y - 1, x + 1]:
                        neigh.append(up[x + 1])
            if not neigh:
                parent.append(next_label)
                labels[y, x] = next_label
                next_label += 1
            else:
                lab = find(neigh[0])
                for other in neigh[1:]:
                    lab = union(lab, other)
                labels[y, x] = lab

    # Resolve equivalences and relabel densely in first-appearance order.
    remap: dict[int, int] = {}
    count = 0
    flat = labels.ravel()
    for i in range(flat.size):
        lab = flat[i]
        if lab == 0:
            continue
        root = find(int(lab))
        dense = remap.get(root)
        if dense is None:
            count += 1
            dense = count
            remap[root] = dense
        flat[i] = dense
    return LabeledRegions(labels=labels, region_count=count)


# ---------------------------------------------------------------------------
# Weighted center of mass
# ---------------------------------------------------------------------------


def weighted_centroid(pixels: np.ndarray, weights) -> tuple[float, float]:
    """Weight-averaged sub-pixel position of a pixel set.

    Args:
        pixels: (N, 2) array of (x, y) integer pixel coordinates.
        weights: single-channel raster of non-negative weights.

    Returns:
        (x, y) with pixel centers at integer coordinates.
    """
    pixels = np.asarray(pixels)
    if pixels.size == 0:
        raise ValueError("empty region")
    plane = as_plane(weights)
    w = plane[pixels[:, 1], pixels[:, 0]].astype(np.float64)
    if np.any(w < 0):
        raise ValueError("negative weights")
    total = w.sum()
    if total <= 0:
        raise ValueError("massless region")
    cx = float((w * pixels[:, 0]).sum() / total)
    cy = float((w * pixels[:, 1]).sum() / total)
    return cx, cy
