"""sepmap: stem-emerging-point localization and geo-referenced landmark mapping.

Pipeline stages: synthetic field generation -> Gaussian likelihood-map ground
truth -> small fully convolutional regression network -> peak extraction ->
detection evaluation (PR / AP / MAD) -> UKF pose fusion, ground-plane
projection and landmark map comparison.
"""

from . import fcnn
from .evaluation import (MatchOutcome, PrCurve, average_precision, match,
                         mean_accepted_distance, pr_curve)
from .extraction import Detection, extract_seps
from .geomap import (CameraConfig, GnssFix, Landmark, LandmarkMap, MapComparison,
                     OdometryMeasurement, Pose2D, UkfParams, average_fixes, build_map,
                     compare_maps, project_detection, ukf_predict, ukf_update,
                     world_to_pixel, wrap_angle)
from .groundtruth import (Annotation, GroundTruthMap, RegionAnnotation, SepPoint,
                          augment, load_annotation, make_groundtruth, region_to_sep,
                          save_annotation)
from .pipeline import E2EConfig, run_e2e, run_map_repro
from .raster import (LabeledRegions, MultiChannelRaster, connected_components,
                     distance_transform, otsu_threshold, weighted_centroid)
from .synthfield import FieldConfig, FieldTruth, corrupt_sensors, generate_field, render_views

__version__ = "0.1.0"
