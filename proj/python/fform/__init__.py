"""F-formation detection, dyad engagement and next-speaker prediction."""

from ._core import (
    ComputationError,
    ValidationError,
    angular_difference,
    center_of_attention,
    circular_mean,
    engagement_from_membership,
    generate_scene,
    interpersonal_distance,
    kmeans,
    normalize_angle,
    pearson,
    reciprocal_angle,
    run_detect,
    run_dyad,
    run_gen,
    run_predict,
    select_group_count,
    silhouette,
    smoothed_angle,
    time_weighted_angle,
)

__all__ = [
    "ComputationError",
    "ValidationError",
    "angular_difference",
    "center_of_attention",
    "circular_mean",
    "engagement_from_membership",
    "generate_scene",
    "interpersonal_distance",
    "kmeans",
    "normalize_angle",
    "pearson",
    "reciprocal_angle",
    "run_detect",
    "run_dyad",
    "run_gen",
    "run_predict",
    "select_group_count",
    "silhouette",
    "smoothed_angle",
    "time_weighted_angle",
]
