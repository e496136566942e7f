from tripletkd.sampling.sampler import (
    Stream,
    sample_index_sets,
    sample_kd_negatives,
    sample_labeled_pairs,
    sample_metric_triplets,
    sample_pairs,
    sample_triplets,
    step_rng,
)

__all__ = [
    "Stream",
    "sample_index_sets",
    "sample_kd_negatives",
    "sample_labeled_pairs",
    "sample_metric_triplets",
    "sample_pairs",
    "sample_triplets",
    "step_rng",
]
