"""Contrastive video summarization from precomputed clip features."""

from .autodiff import Parameter, Tensor, adam_step, backward
from .contrastive import ContrastiveConfig, ProjectionHead, contrastive_loss, project
from .distance import SubVideoConfig, clip_contrastive_distance, mean_feature_distance
from .highlight import HighlightConfig, gaussian_smooth, select_theta, threshold_segments
from .io import VideoRecord, load_manifest, make_folds, read_features, write_features
from .metrics import Segment, f1_summary, kendall_tau, mean_ap, spearman_rho, temporal_iou
from .pipeline import (
    Checkpoint,
    TrainingConfig,
    extract_summary,
    forward_scores,
    infer_importance_scores,
    summarize,
    train,
)
from .selector import (
    SelectionResult,
    SelectorConfig,
    hard_topk,
    selection_error,
    soft_argmax,
    soft_topk_halving,
    soft_topk_iterative,
)
from .synthetic import SynthConfig, generate

__version__ = "0.1.0"
