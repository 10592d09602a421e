"""Desk-scale HiFT tracker: C++ core with numpy-facing bindings."""

from ._hift import (  # noqa: F401
    attention,
    auc,
    cle,
    conv2d,
    gen_sequence,
    iou,
    layer_norm,
    make_labels,
    precision_at_20,
    precision_plot,
    softmax_rows,
    success_plot,
    track_sequence,
    write_sequence_dir,
    xcorr,
)

__all__ = [
    "attention",
    "auc",
    "cle",
    "conv2d",
    "gen_sequence",
    "iou",
    "layer_norm",
    "make_labels",
    "precision_at_20",
    "precision_plot",
    "softmax_rows",
    "success_plot",
    "track_sequence",
    "write_sequence_dir",
    "xcorr",
]
