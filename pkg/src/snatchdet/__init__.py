"""Snatch-and-run robbery detection from pose keypoint streams."""

from .config import PipelineConfig, load_config
from .features import (
    FeatureParams,
    FeatureSchema,
    FeatureVector,
    extract_segment,
    full_schema,
    pair_segment,
)
from .forest import Dataset, ForestConfig, ForestModel, predict, train
from .pipeline import StreamEngine, corpus_dataset, extract_clip_row, extract_windows
from .preprocess import SmoothingConfig, aggressor_probabilities, smooth_track, torso_height
from .selection import pca_project, select_top_k
from .synth import Clip, ScenarioSpec, generate, generate_corpus
from .temporal import AlarmState, HysteresisConfig, evidence_window, step
from .types import FrameRecord, Keypoint, PairSegment, Skeleton, Track, build_tracks, validate_frame

__version__ = "0.1.0"

__all__ = [
    "AlarmState",
    "Clip",
    "Dataset",
    "FeatureParams",
    "FeatureSchema",
    "FeatureVector",
    "ForestConfig",
    "ForestModel",
    "FrameRecord",
    "HysteresisConfig",
    "Keypoint",
    "PairSegment",
    "PipelineConfig",
    "ScenarioSpec",
    "Skeleton",
    "SmoothingConfig",
    "StreamEngine",
    "Track",
    "aggressor_probabilities",
    "build_tracks",
    "corpus_dataset",
    "evidence_window",
    "extract_clip_row",
    "extract_segment",
    "extract_windows",
    "full_schema",
    "generate",
    "generate_corpus",
    "load_config",
    "pair_segment",
    "pca_project",
    "predict",
    "select_top_k",
    "smooth_track",
    "step",
    "torso_height",
    "train",
    "validate_frame",
]
