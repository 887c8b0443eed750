from .fixtures import adult_schema, german_raw, german_schema, load_german, make_synthetic
from .schema import ColumnSchema, Schema, load_schema
from .tabular import (RawTable, SplitSet, Standardizer, TabularDataset, dummy_code, load_csv, load_dataset,
                      prepare_splits, split, split_indices, split_sizes, standardize)

__all__ = [
    "ColumnSchema", "RawTable", "Schema", "SplitSet", "Standardizer", "TabularDataset",
    "adult_schema", "dummy_code", "german_raw", "german_schema", "load_csv", "load_dataset", "load_german",
    "load_schema", "make_synthetic", "prepare_splits", "split", "split_indices", "split_sizes", "standardize",
]
