"""Road / non-road classification for gray-scale frames.

Pipeline: polygon-annotated frames -> per-ROI feature vectors -> cascade of
boosted depth-2 decision trees -> sliding-window masks and ROC evaluation.
"""

from .annotation import (
    FrameAnnotation,
    ObjectClass,
    Polygon,
    Provenance,
    RoiLabel,
    RoiRelation,
    label_roi,
    parse_annotation_xml,
    rect_polygon_relation,
    serialize_annotation_xml,
)
from .boosting import (
    DecisionTree,
    LabeledSample,
    StageConfig,
    StageModel,
    calibrate_threshold,
    stage_accepts,
    stage_score,
    train_stage,
    train_tree,
    weighted_error,
)
from .cascade import (
    CascadeConfig,
    CascadeModel,
    cascade_accepts,
    cascade_rates,
    load_cascade,
    save_cascade,
    train_cascade,
)
from .evaluation import ConfusionCounts, RocCurve, confusion, render_mask, roc_sweep
from .features import FeatureVector, extract_features, feature_dim
from .imaging import (
    GradientField,
    GrayImage,
    Rect,
    crop,
    gradient_field,
    intensity_histogram,
    load_pgm,
    normalize,
    save_pgm,
)
from .sampler import SplitSpec, sample_random_rois, sliding_windows, split_frames
from .synthdata import SceneParams, generate_corpus, generate_scene, load_corpus

__version__ = "0.1.0"
