"""Dance synchronization engine."""

import json

from ._syncup import (
    DEFAULT_LAMBDA,
    NUM_PARTS,
    SyncupError,
    align_recordings,
    assign_frame,
    body_part_names,
    bpd_frame,
    bpd_to_color_input,
    cross_validate,
    estimate_beats,
    evaluate_metrics,
    export_heatmap_svg,
    jet_color,
    onset_envelope,
    ops_addition,
    skeleton_distance,
    synthetic_ratings_csv,
    synthetic_session,
    track,
    train_model,
    validate_pose_stream,
)
from . import _syncup


def analyze_group(poses, config=None, beats=None, bpm=None, fps=None):
    """Analyze a group pose stream; returns the report as a dict."""
    text = _syncup.analyze_group(poses, json.dumps(config or {}), beats, bpm, fps)
    return json.loads(text)


__all__ = [name for name in dir() if not name.startswith("_")]
