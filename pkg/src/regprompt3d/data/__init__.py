from .corruptions import KINDS, CorruptionSpec, corrupt
from .descriptions import DescriptionBank, build_description_bank
from .manifest import SampleRecord, load_manifest, materialize, save_manifest
from .shapes import FAMILIES, FAMILY_NAMES, PointCloud, ShapeFamily, gen_shape
from .splits import (
    BenchmarkSplit,
    DatasetSpec,
    build_dataset,
    corruption_config,
    cross_domain_config,
    sample_few_shot,
    split_base_new,
    split_train_test,
)
