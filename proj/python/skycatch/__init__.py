"""Impact-point prediction for in-flight objects."""

from ._core import (
    CAPTURE_DT,
    DEFAULT_PLANE_HEIGHT,
    Error,
    InputError,
    Model,
    TrainingWindow,
    Trajectory,
    augment,
    catalog_ids,
    checkpoint_kind,
    default_seen_ids,
    default_unseen_ids,
    expand_dataset,
    generate_dataset,
    ground_truth_impact,
    load_model,
    make_trajectory,
    make_windows,
    mann_whitney,
    newton_predict,
    pds,
    pds_samples,
    read_dataset,
    write_dataset,
)

__all__ = [
    "CAPTURE_DT",
    "DEFAULT_PLANE_HEIGHT",
    "Error",
    "InputError",
    "Model",
    "TrainingWindow",
    "Trajectory",
    "augment",
    "catalog_ids",
    "checkpoint_kind",
    "default_seen_ids",
    "default_unseen_ids",
    "expand_dataset",
    "generate_dataset",
    "ground_truth_impact",
    "load_model",
    "make_trajectory",
    "make_windows",
    "mann_whitney",
    "newton_predict",
    "pds",
    "pds_samples",
    "read_dataset",
    "write_dataset",
]
