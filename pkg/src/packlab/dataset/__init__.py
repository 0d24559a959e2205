from packlab.dataset.features import (
    BASE_FEATURES,
    DerivedFeature,
    extract_features,
    feature_descriptions,
    load_feature_registry,
)
from packlab.dataset.store import (
    NOT_PACKED,
    Dataset,
    FeatureMatrix,
    FilelessDataset,
    SampleRecord,
    human_size,
    merge,
    open_dataset,
    split,
)

__all__ = [
    "BASE_FEATURES",
    "DerivedFeature",
    "extract_features",
    "feature_descriptions",
    "load_feature_registry",
    "NOT_PACKED",
    "Dataset",
    "FeatureMatrix",
    "FilelessDataset",
    "SampleRecord",
    "human_size",
    "merge",
    "open_dataset",
    "split",
]
