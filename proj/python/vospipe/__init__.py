"""Python interface to the video object segmentation toolkit."""

from vospipe._core import (  # noqa: F401
    argmax_labels,
    attend,
    attend_lstt_v2,
    attend_with_identity,
    boundary_f,
    correlation,
    encode_frame,
    evaluate_sequence,
    fuse_average,
    fuse_max,
    gen_synthetic,
    gradient_check,
    jaccard,
    overall_score,
    propagate,
    read_mask,
    read_volume,
    small_object_select,
    softmax_rows,
    standard_suite_specs,
    topk_mask_scores,
    write_mask,
    write_volume,
)

__version__ = "0.1.0"
