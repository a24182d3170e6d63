"""Ingestion, grouping, splitting and encoding of interaction logs."""
from .grouping import CategoryGroup, build_item_profile, group_category_interactions, profile_nonzeros
from .interactions import Interaction, ingest_raw, write_canonical
from .split import SplitPolicy, SplitResult, UserExample, leakage_violations, split_examples
from .vocab import (
    PAD,
    Encoded,
    FeatureSchema,
    Record,
    Vocabulary,
    encode_delta,
    encode_example,
    encode_record,
    read_records,
    to_record,
    write_records,
)
