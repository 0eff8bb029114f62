"""Geo-referencing and landmark mapping.

Robot poses come from an unscented Kalman filter that fuses odometry
(prediction) with GNSS position fixes (update), optionally smoothed first by
averaging fixes over constant-motion windows. Image detections project onto
the flat ground plane through a nadir pinhole camera, duplicate sightings
merge into landmarks, and two landmark maps compare by greedy
minimal-distance matching.

Units: world coordinates in millimeters, headings in radians normalized to
(-pi, pi], timestamps in seconds.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Pose2D", "GnssFix", "OdometryMeasurement", "CameraConfig",
    "Landmark", "LandmarkMap", "MapComparison", "UkfParams",
    "wrap_angle", "ukf_predict", "ukf_update", "average_fixes",
    "project_detection", "world_to_pixel", "build_map", "compare_maps",
    "landmarks_to_csv", "landmarks_from_csv",
    "trajectory_to_csv", "trajectory_from_csv",
]


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = math.remainder(a, math.tau)
    if w <= -math.pi:
        w += math.tau
    return w


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float
    cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {cov.shape}")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))


@dataclass(frozen=True)
class GnssFix:
    timestamp: float
    x: float
    y: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"GNSS sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class OdometryMeasurement:
    timestamp: float
    distance: float          # forward travel since the previous measurement
    dtheta: float            # heading change over the step
    sigma_per_mm: float = 0.01
    sigma_per_rad: float = 0.01

    def __post_init__(self):
        if self.sigma_per_mm <= 0 or self.sigma_per_rad <= 0:
            raise ValueError("odometry noise parameters must be positive")


@dataclass(frozen=True)
class CameraConfig:
    focal_px: float
    cx: float
    cy: float
    height_mm: float
    mount_dx: float = 0.0
    mount_dy: float = 0.0
    nadir: bool = True

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError(f"focal length must be positive, got {self.focal_px}")
        if self.height_mm <= 0:
            raise ValueError(f"mount height must be positive, got {self.height_mm}")


# ---------------------------------------------------------------------------
# Unscented Kalman filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UkfParams:
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    # Additive process-noise floor, applied even on zero-motion steps.
    trans_floor_mm: float = 0.05
    rot_floor_rad: float = 1e-4
    psd_tolerance: float = 1e-6

_DEFAULT_UKF = UkfParams()
_N_STATE = 3


def _sigma_weights(params: UkfParams):
    n = _N_STATE
    lam = params.alpha ** 2 * (n + params.kappa) - n
    wm = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    wc = wm.copy()
    wm[0] = lam / (n + lam)
    wc[0] = lam / (n + lam) + (1.0 - params.alpha ** 2 + params.beta)
    return wm, wc, math.sqrt(n + lam)


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition (handles singular covs)."""
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _check_psd(cov: np.ndarray, params: UkfParams) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals = np.linalg.eigvalsh(cov)
    scale = max(1.0, float(vals.max()))
    if vals.min() < -params.psd_tolerance * scale:
        raise ValueError(f"filter divergence: covariance eigenvalue {vals.min():.3e}")
    return cov


def _sigma_points(mean: np.ndarray, cov: np.ndarray, gamma: float) -> np.ndarray:
    s = _sqrt_psd(cov)
    pts = np.empty((2 * _N_STATE + 1, _N_STATE))
    pts[0] = mean
    for i in range(_N_STATE):
        pts[1 + i] = mean + gamma * s[:, i]
        pts[1 + _N_STATE + i] = mean - gamma * s[:, i]
    return pts


def _mean_state(points: np.ndarray, wm: np.ndarray) -> np.ndarray:
    """Weighted sigma-point mean; heading averaged as a wrapped residual
    around the center point so trajectories near +-pi stay consistent."""
    mean = points.T @ wm
    ref = points[0, 2]
    dth = np.array([wrap_angle(t - ref) for t in points[:, 2]])
    mean[2] = wrap_angle(ref + float(dth @ wm))
    return mean


def _residuals(points: np.ndarray, mean: np.ndarray) -> np.ndarray:
    res = points - mean
    res[:, 2] = [wrap_angle(t - mean[2]) for t in points[:, 2]]
    return res


def ukf_predict(pose: Pose2D, odom: OdometryMeasurement,
                params: UkfParams = _DEFAULT_UKF) -> Pose2D:
    """Propagate the pose through the odometry motion model.

    Motion model: x' = x + d cos(theta + dtheta/2), y' = y + d sin(theta +
    dtheta/2), theta' = theta + dtheta, with additive process noise scaled by
    the traveled distance and turned angle (plus a small floor).
    """
    wm, wc, gamma = _sigma_weights(params)
    mean = np.array([pose.x, pose.y, pose.theta])
    pts = _sigma_points(mean, _check_psd(pose.cov, params), gamma)

    moved = np.empty_like(pts)
    half_turn = pts[:, 2] + 0.5 * odom.dtheta
    moved[:, 0] = pts[:, 0] + odom.distance * np.cos(half_turn)
    moved[:, 1] = pts[:, 1] + odom.distance * np.sin(half_turn)
    moved[:, 2] = pts[:, 2] + odom.dtheta

    new_mean = _mean_state(moved, wm)
    res = _residuals(moved, new_mean)
    cov = (res.T * wc) @ res

    s_t = odom.sigma_per_mm * abs(odom.distance) + params.trans_floor_mm
    s_r = odom.sigma_per_rad * abs(odom.dtheta) + params.rot_floor_rad
    cov = cov + np.diag([s_t ** 2, s_t ** 2, s_r ** 2])
    cov = _check_psd(cov, params)
    return Pose2D(new_mean[0], new_mean[1], new_mean[2], cov)


def ukf_update(pose: Pose2D, fix: GnssFix, params: UkfParams = _DEFAULT_UKF) -> Pose2D:
    """Fuse a GNSS position fix (observation h(x) = (x, y), noise sigma^2 I)."""
    wm, wc, gamma = _sigma_weights(params)
    mean = np.array([pose.x, pose.y, pose.theta])
    pts = _sigma_points(mean, _check_psd(pose.cov, params), gamma)

    zs = pts[:, :2]
    z_mean = zs.T @ wm
    dz = zs - z_mean
    s = (dz.T * wc) @ dz + fix.sigma ** 2 * np.eye(2)
    dx = _residuals(pts, _mean_state(pts, wm))
    cross = (dx.T * wc) @ dz

    gain = cross @ np.linalg.inv(s)
    innovation = np.array([fix.x, fix.y]) - z_mean
    new_mean = mean + gain @ innovation
    cov = _check_psd(pose.cov - gain @ s @ gain.T, params)
    return Pose2D(new_mean[0], new_mean[1], wrap_angle(new_mean[2]), cov)


# ---------------------------------------------------------------------------
# GNSS fix averaging over constant-motion windows
# ---------------------------------------------------------------------------


def average_fixes(fixes, odometry, max_window: int = 10,
                  speed_var_frac: float = 0.1,
                  stationary_speed: float = 1.0) -> list[GnssFix]:
    """Average GNSS fixes over windows of constant robot motion.

    Fixes group greedily into windows of up to `max_window` consecutive fixes
    whose covered odometry speed samples have a standard deviation below
    `speed_var_frac` times the mean speed (or below `stationary_speed` mm/s
    when nearly stationary). Every fix in a window is shifted to the window's
    last timestamp along the odometry arc length, in the direction of the
    window's start-to-end secant, and the shifted positions average into one
    output fix whose sigma shrinks by sqrt(n). Fixes taken during changing
    motion pass through untouched.
    """
    fixes = list(fixes)
    if not fixes:
        return []
    odometry = list(odometry)

    odo_t = np.array([o.timestamp for o in odometry])
    arc = np.concatenate([[0.0], np.cumsum([o.distance for o in odometry])]) if odometry else np.zeros(1)
    # arc[i + 1] is cumulative distance at odometry[i].timestamp
    speeds = []
    speed_t = []
    for i in range(1, len(odometry)):
        dt = odometry[i].timestamp - odometry[i - 1].timestamp
        if dt > 0:
            speeds.append(odometry[i].distance / dt)
            speed_t.append(odometry[i].timestamp)
    speeds = np.array(speeds)
    speed_t = np.array(speed_t)

    def arc_at(t: float) -> float:
        if len(odometry) == 0:
            return 0.0
        return float(np.interp(t, odo_t, arc[1:], left=arc[1], right=arc[-1]))

    def constant_motion(t0: float, t1: float) -> bool:
        sel = (speed_t > t0) & (speed_t <= t1)
        if not np.any(sel):
            return True
        v = speeds[sel]
        mean = float(v.mean())
        return float(v.std()) <= max(speed_var_frac * abs(mean), stationary_speed)

    out: list[GnssFix] = []
    i = 0
    n_fix = len(fixes)
    while i < n_fix:
        j = i
        while (j + 1 < n_fix and j + 1 - i < max_window
               and constant_motion(fixes[i].timestamp, fixes[j + 1].timestamp)):
            j += 1
        window = fixes[i:j + 1]
        if len(window) == 1:
            out.append(window[0])
        else:
            last = window[-1]
            secant = np.array([last.x - window[0].x, last.y - window[0].y])
            norm = float(np.hypot(*secant))
            unit = secant / norm if norm > 1e-12 else np.zeros(2)
            s_end = arc_at(last.timestamp)
            shifted = np.array([
                [f.x, f.y] + (s_end - arc_at(f.timestamp)) * unit for f in window])
            pos = shifted.mean(axis=0)
            sigma = math.sqrt(sum(f.sigma ** 2 for f in window)) / len(window)
            out.append(GnssFix(last.timestamp, float(pos[0]), float(pos[1]), sigma))
        i = j + 1
    return out


# ---------------------------------------------------------------------------
# Ground-plane projection
# ---------------------------------------------------------------------------


def project_detection(det, pose: Pose2D, cam: CameraConfig) -> tuple[float, float]:
    """World position of an image detection through the nadir pinhole model.

    The pixel ray intersects the flat ground plane at a robot-frame offset of
    ((x - cx) / f, (y - cy) / f) * height relative to the camera mount; that
    offset rotates by the pose heading and translates by the pose position.
    """
    if not cam.nadir:
        raise ValueError("projection requires a nadir-pointing camera")
    ox = (det.x - cam.cx) / cam.focal_px * cam.height_mm + cam.mount_dx
    oy = (det.y - cam.cy) / cam.focal_px * cam.height_mm + cam.mount_dy
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return (pose.x + c * ox - s * oy, pose.y + s * ox + c * oy)


def world_to_pixel(wx: float, wy: float, pose: Pose2D, cam: CameraConfig) -> tuple[float, float]:
    """Inverse of project_detection: world point to sub-pixel image coordinates."""
    if not cam.nadir:
        raise ValueError("projection requires a nadir-pointing camera")
    dx, dy = wx - pose.x, wy - pose.y
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    rx = c * dx + s * dy - cam.mount_dx
    ry = -s * dx + c * dy - cam.mount_dy
    return (cam.cx + rx / cam.height_mm * cam.focal_px,
            cam.cy + ry / cam.height_mm * cam.focal_px)


# ---------------------------------------------------------------------------
# Landmark maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Landmark:
    x: float
    y: float
    confidence: float      # mean confidence of the merged observations
    observations: int = 1


@dataclass(frozen=True)
class LandmarkMap:
    landmarks: tuple
    run_id: str = ""
    date_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "landmarks", tuple(self.landmarks))

    def __len__(self) -> int:
        return len(self.landmarks)


def build_map(frames, cam: CameraConfig, merge_radius: float = 7.9,
              run_id: str = "", date_tag: str = "", max_passes: int = 100) -> LandmarkMap:
    """Project per-frame detections and merge duplicates into landmarks.

    `frames` is a list of (detections, pose) pairs. Any two landmarks closer
    than `merge_radius` merge into their confidence-weighted mean, repeating
    in (y, x)-sorted order until a fixpoint; observation counts accumulate.
    """
    if merge_radius <= 0:
        raise ValueError(f"merge_radius must be positive, got {merge_radius}")
    xs, ys, ws, cnt = [], [], [], []
    for detections, pose in frames:
        for det in detections:
            wx, wy = project_detection(det, pose, cam)
            xs.append(wx)
            ys.append(wy)
            ws.append(max(float(det.confidence), 1e-12))
            cnt.append(1)
    x = np.array(xs, dtype=np.float64)
    y = np.array(ys, dtype=np.float64)
    w = np.array(ws, dtype=np.float64)
    n_obs = np.array(cnt, dtype=np.int64)

    for _ in range(max_passes):
        if len(x) <= 1:
            break
        order = np.lexsort((x, y))
        x, y, w, n_obs = x[order], y[order], w[order], n_obs[order]
        alive = np.ones(len(x), dtype=bool)
        merged_any = False
        for i in range(len(x)):
            if not alive[i]:
                continue
            while True:
                d2 = (x - x[i]) ** 2 + (y - y[i]) ** 2
                d2[~alive] = np.inf
                d2[i] = np.inf
                j = int(np.argmin(d2))
                if not np.isfinite(d2[j]) or d2[j] >= merge_radius ** 2:
                    break
                total = w[i] + w[j]
                x[i] = (w[i] * x[i] + w[j] * x[j]) / total
                y[i] = (w[i] * y[i] + w[j] * y[j]) / total
                w[i] = total
                n_obs[i] += n_obs[j]
                alive[j] = False
                merged_any = True
        x, y, w, n_obs = x[alive], y[alive], w[alive], n_obs[alive]
        if not merged_any:
            break
    else:
        raise ValueError(f"landmark merging did not settle within {max_passes} passes")

    order = np.lexsort((x, y))
    landmarks = tuple(
        Landmark(float(x[i]), float(y[i]), float(w[i] / n_obs[i]), int(n_obs[i]))
        for i in order)
    return LandmarkMap(landmarks, run_id=run_id, date_tag=date_tag)


@dataclass(frozen=True)
class MapComparison:
    matched: int
    outliers: int
    recall: float
    precision: float
    mu_x: float
    sigma_x: float
    mu_y: float
    sigma_y: float
    mean_distance: float
    acceptance: float
    errors: tuple  # matched-pair Euclidean distances

    def to_json(self) -> str:
        doc = {
            "matched": self.matched,
            "outliers": self.outliers,
            "recall": self.recall,
            "precision": self.precision,
            "mu_x_mm": self.mu_x,
            "sigma_x_mm": self.sigma_x,
            "mu_y_mm": self.mu_y,
            "sigma_y_mm": self.sigma_y,
            "mean_distance_mm": self.mean_distance,
            "acceptance_mm": self.acceptance,
            "errors_mm": list(self.errors),
        }
        return json.dumps(doc, indent=1) + "\n"


def compare_maps(earlier: LandmarkMap, later: LandmarkMap, acceptance="auto") -> MapComparison:
    """Match two landmark maps and report recall, precision and error stats.

    Landmarks pair greedily by ascending Euclidean distance, one-to-one.
    Pairs within the acceptance radius are matches; every unmatched landmark
    of the earlier map counts as an outlier. With acceptance="auto" the radius
    is three sigma of the nearest-neighbor error distribution, with sigma
    taken as the RMS of the earlier map's nearest-neighbor distances (the
    deviation of the 2-D error about zero, not the spread of the scalar
    distances, which would under-cover an isotropic error cloud).
    """
    if len(earlier) == 0 or len(later) == 0:
        raise ValueError("empty map")
    a = np.array([[lm.x, lm.y] for lm in earlier.landmarks])
    b = np.array([[lm.x, lm.y] for lm in later.landmarks])
    dists = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))

    if acceptance == "auto":
        nn = dists.min(axis=1)
        acceptance = 3.0 * float(np.sqrt(np.mean(nn * nn)))
    acceptance = float(acceptance)
    if acceptance < 0:
        raise ValueError(f"acceptance must be non-negative, got {acceptance}")

    flat = [(dists[i, j], i, j) for i in range(len(a)) for j in range(len(b))]
    flat.sort()
    a_free = [True] * len(a)
    b_free = [True] * len(b)
    pairs = []
    for d, i, j in flat:
        if a_free[i] and b_free[j]:
            a_free[i] = False
            b_free[j] = False
            pairs.append((d, i, j))

    matched = [(d, i, j) for d, i, j in pairs if d <= acceptance]
    errors = tuple(float(d) for d, _, _ in matched)
    if matched:
        ex = np.array([b[j, 0] - a[i, 0] for _, i, j in matched])
        ey = np.array([b[j, 1] - a[i, 1] for _, i, j in matched])
        mu_x, sigma_x = float(ex.mean()), float(ex.std())
        mu_y, sigma_y = float(ey.mean()), float(ey.std())
        mean_distance = float(np.mean(errors))
    else:
        mu_x = sigma_x = mu_y = sigma_y = mean_distance = float("nan")
    return MapComparison(
        matched=len(matched),
        outliers=len(a) - len(matched),
        recall=len(matched) / len(a),
        precision=len(matched) / len(b),
        mu_x=mu_x, sigma_x=sigma_x, mu_y=mu_y, sigma_y=sigma_y,
        mean_distance=mean_distance,
        acceptance=acceptance,
        errors=errors,
    )


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------


def landmarks_to_csv(landmark_map: LandmarkMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x_mm", "y_mm", "confidence", "observations"])
    for lm in landmark_map.landmarks:
        writer.writerow([repr(lm.x), repr(lm.y), repr(lm.confidence), lm.observations])
    return buf.getvalue()


def landmarks_from_csv(text: str, run_id: str = "", date_tag: str = "") -> LandmarkMap:
    rows = list(csv.reader(io.StringIO(text)))
    landmarks = tuple(Landmark(float(x), float(y), float(c), int(n))
                      for x, y, c, n in rows[1:])
    return LandmarkMap(landmarks, run_id=run_id, date_tag=date_tag)


def trajectory_to_csv(odometry, fixes) -> str:
    """One row per odometry step; GNSS columns filled when a fix shares the
    timestamp, empty otherwise."""
    by_time = {f.timestamp: f for f in fixes}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp", "odo_dist_mm", "odo_dtheta_rad",
                     "gnss_x_mm", "gnss_y_mm", "gnss_sigma_mm"])
    for o in odometry:
        fix = by_time.get(o.timestamp)
        row = [repr(o.timestamp), repr(o.distance), repr(o.dtheta)]
        row += [repr(fix.x), repr(fix.y), repr(fix.sigma)] if fix else ["", "", ""]
        writer.writerow(row)
    return buf.getvalue()


def trajectory_from_csv(text: str, sigma_per_mm: float = 0.01,
                        sigma_per_rad: float = 0.01):
    odometry = []
    fixes = []
    rows = list(csv.reader(io.StringIO(text)))
    for row in rows[1:]:
        t, dist, dth = float(row[0]), float(row[1]), float(row[2])
        odometry.append(OdometryMeasurement(t, dist, dth, sigma_per_mm, sigma_per_rad))
        if row[3] != "":
            fixes.append(GnssFix(t, float(row[3]), float(row[4]), float(row[5])))
    return odometry, fixes
