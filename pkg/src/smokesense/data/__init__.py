"""Dataset assembly: manifests, sequence loading, sample alignment,
synthetic corpora, and signal probes."""

from smokesense.data.manifest import (
    MANIFEST_FILENAME,
    DEFAULT_SPLIT_FRACTIONS,
    SPLIT_NAMES,
    DatasetSplit,
    ManifestEntry,
    apply_split,
    largest_remainder_counts,
    make_splits,
    read_manifest,
    write_manifest,
)
from smokesense.data.probes import (
    certify_discriminative_corpus,
    corpus_probe_features,
    logistic_probe_auc,
    rank_auc,
)
from smokesense.data.samples import (
    AlignedSample,
    align_weather_to_frames,
    pair_consecutive_frames,
    stack_samples,
)
from smokesense.data.sequences import (
    ALL_OFFSETS,
    N_FRAMES,
    FireSequence,
    frame_filename,
    load_fire_masks,
    load_fire_sequence,
    mask_filename,
    offset_tag,
)
from smokesense.data.synthetic import (
    SMOKE_COLOR,
    WEATHER_DIRNAME,
    SyntheticSpec,
    generate_synthetic_dataset,
)

__all__ = [
    "ALL_OFFSETS",
    "AlignedSample",
    "DatasetSplit",
    "FireSequence",
    "MANIFEST_FILENAME",
    "ManifestEntry",
    "N_FRAMES",
    "DEFAULT_SPLIT_FRACTIONS",
    "SMOKE_COLOR",
    "SPLIT_NAMES",
    "SyntheticSpec",
    "WEATHER_DIRNAME",
    "align_weather_to_frames",
    "apply_split",
    "certify_discriminative_corpus",
    "corpus_probe_features",
    "frame_filename",
    "generate_synthetic_dataset",
    "largest_remainder_counts",
    "load_fire_masks",
    "load_fire_sequence",
    "logistic_probe_auc",
    "make_splits",
    "mask_filename",
    "offset_tag",
    "pair_consecutive_frames",
    "rank_auc",
    "read_manifest",
    "stack_samples",
    "write_manifest",
]
