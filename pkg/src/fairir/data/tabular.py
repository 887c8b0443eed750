"""CSV ingestion, dummy coding, standardization and stratified splitting."""
from __future__ import annotations

import csv
import hashlib
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..dist import make_rng
from ..errors import DegenerateDataError, IngestionError
from .schema import Schema

log = logging.getLogger(__name__)

MISSING_TOKENS = ("", "?", "NA", "nan")
SPLIT_RATIOS = (0.70, 0.15, 0.15)
SPLIT_STREAM = 101


@dataclass
class RawTable:
    """Parsed CSV cells (as strings) for the schema's columns.

    ``row_numbers`` are 1-based data-row numbers in the source file (the
    header is row 0), so dropped rows leave gaps.
    """

    columns: dict[str, list[str]]
    row_numbers: np.ndarray
    source: str
    n_dropped: int = 0

    def __len__(self) -> int:
        return len(self.row_numbers)

    def row(self, i: int) -> dict[str, str]:
        return {k: v[i] for k, v in self.columns.items()}


@dataclass
class TabularDataset:
    X: np.ndarray
    y: np.ndarray
    s: np.ndarray
    feature_names: list[str]
    numeric_mask: np.ndarray
    provenance: dict = field(default_factory=dict)
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        self.numeric_mask = np.asarray(self.numeric_mask, dtype=bool)
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.y))
        n = len(self.y)
        if self.X.shape != (n, len(self.feature_names)) or self.s.shape != (n,):
            raise IngestionError("inconsistent dataset shapes")
        if not np.all(np.isfinite(self.X)):
            raise IngestionError("feature matrix contains non-finite entries")
        for name, v in (("y", self.y), ("s", self.s)):
            if not np.all((v == 0) | (v == 1)):
                raise IngestionError(f"{name} must be binary")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "TabularDataset":
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=self.y[idx], s=self.s[idx], row_ids=self.row_ids[idx])

    def check_nondegenerate(self):
        for name, v in (("label", self.y), ("sensitive attribute", self.s)):
            if v.min() == v.max():
                raise DegenerateDataError(f"{name} is constant ({v[0]:.0f}) on {len(v)} rows")

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.X, self.y, self.s):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update("|".join(self.feature_names).encode())
        return h.hexdigest()[:16]


@dataclass
class SplitSet:
    train: TabularDataset
    val: TabularDataset
    test: TabularDataset
    seed: int
    ratios: tuple = SPLIT_RATIOS

    def __iter__(self):
        return iter((self.train, self.val, self.test))


def load_csv(path, schema: Schema) -> RawTable:
    """Read a headered UTF-8 CSV, keeping only the schema's columns.

    Rows with a missing cell in any schema column are dropped. Unknown
    categories and unparseable numbers raise IngestionError with the row
    number and column.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        missing = [c.name for c in schema.columns if c.name not in header]
        if missing:
            raise IngestionError(f"{path}: header lacks column(s) {missing}")
        pos = {c.name: header.index(c.name) for c in schema.columns}
        cols: dict[str, list[str]] = {c.name: [] for c in schema.columns}
        rows, dropped = [], 0
        for rownum, rec in enumerate(reader, start=1):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != len(header):
                raise IngestionError(f"{path}: row {rownum} has {len(rec)} fields, expected {len(header)}")
            cells = {name: rec[i].strip() for name, i in pos.items()}
            if any(v in MISSING_TOKENS for v in cells.values()):
                dropped += 1
                continue
            for c in schema.columns:
                v = cells[c.name]
                if c.kind == "numeric":
                    try:
                        x = float(v)
                    except ValueError:
                        raise IngestionError(f"{path}: row {rownum}, column {c.name!r}: cannot parse {v!r} as a number") from None
                    if not np.isfinite(x):
                        raise IngestionError(f"{path}: row {rownum}, column {c.name!r}: non-finite value")
                elif v not in c.categories:
                    raise IngestionError(f"{path}: row {rownum}, column {c.name!r}: unknown category {v!r}")
            for name, v in cells.items():
                cols[name].append(v)
            rows.append(rownum)
    if dropped:
        log.info("%s: dropped %d rows with missing values", path, dropped)
    return RawTable(columns=cols, row_numbers=np.asarray(rows, dtype=int), source=str(path), n_dropped=dropped)


def dummy_code(raw: RawTable, schema: Schema) -> TabularDataset:
    """Expand categoricals to one indicator per level; numerics pass through."""
    n = len(raw)
    blocks, names, numeric = [], [], []
    for c in schema.columns:
        vals = raw.columns[c.name]
        if c.kind == "numeric":
            blocks.append(np.asarray(vals, dtype=np.float64)[:, None])
            names.append(c.name)
            numeric.append(True)
        elif c.kind == "categorical":
            lookup = {v: j for j, v in enumerate(c.categories)}
            block = np.zeros((n, len(c.categories)))
            block[np.arange(n), [lookup[v] for v in vals]] = 1.0
            blocks.append(block)
            names.extend(f"{c.name}={v}" for v in c.categories)
            numeric.extend([False] * len(c.categories))
        elif c.kind == "binary":
            blocks.append((np.asarray(vals) == c.positive_value).astype(np.float64)[:, None])
            names.append(f"{c.name}={c.positive_value}")
            numeric.append(False)
    y = (np.asarray(raw.columns[schema.label.name]) == schema.label.positive_label).astype(np.float64)
    sens = schema.sensitive
    s = (np.asarray(raw.columns[sens.name]) == sens.privileged_value).astype(np.float64)
    if schema.sensitive_as_feature:
        blocks.append(s[:, None])
        names.append(f"{sens.name}={sens.privileged_value}")
        numeric.append(False)
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    ds = TabularDataset(X=X, y=y, s=s, feature_names=names, numeric_mask=np.asarray(numeric, dtype=bool),
                        provenance={"source": raw.source, "schema": schema.name, "schema_hash": schema.digest(),
                                    "dropped_rows": raw.n_dropped},
                        row_ids=raw.row_numbers.copy())
    if X.shape[1] != schema.width:
        raise IngestionError(f"dummy-coded width {X.shape[1]} != schema width {schema.width}")
    ds.check_nondegenerate()
    return ds


def load_dataset(csv_path, schema: Schema) -> TabularDataset:
    return dummy_code(load_csv(csv_path, schema), schema)


class Standardizer(TransformerMixin, BaseEstimator):
    """Scale selected columns to zero mean and unit variance.

    Columns outside ``numeric_mask`` (indicators) pass through untouched.
    Numeric columns with zero variance on the fitted data are dropped with a
    warning.
    """

    def __init__(self, numeric_mask=None):
        self.numeric_mask = numeric_mask

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        mask = np.ones(X.shape[1], bool) if self.numeric_mask is None else np.asarray(self.numeric_mask, bool)
        if mask.shape != (X.shape[1],):
            raise ValueError("numeric_mask length does not match the number of columns")
        self.mean_ = np.where(mask, X.mean(axis=0), 0.0)
        std = X.std(axis=0)
        self.scale_ = np.where(mask, np.where(std > 0, std, 1.0), 1.0)
        self.keep_ = ~(mask & (std == 0))
        if not self.keep_.all():
            warnings.warn(f"dropping {int((~self.keep_).sum())} zero-variance numeric column(s)", stacklevel=2)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        return ((X - self.mean_) / self.scale_)[:, self.keep_]


def standardize(splits: SplitSet) -> SplitSet:
    """Fit a :class:`Standardizer` on the train split and apply it to all three."""
    if len(splits.train) == 0:
        raise DegenerateDataError("empty train split")
    scaler = Standardizer(splits.train.numeric_mask).fit(splits.train.X)
    names = [n for n, k in zip(splits.train.feature_names, scaler.keep_) if k]
    mask = splits.train.numeric_mask[scaler.keep_]

    def apply(ds: TabularDataset) -> TabularDataset:
        return replace(ds, X=scaler.transform(ds.X), feature_names=names, numeric_mask=mask)

    return SplitSet(apply(splits.train), apply(splits.val), apply(splits.test), splits.seed, splits.ratios)


def split_sizes(n: int, ratios=SPLIT_RATIOS) -> tuple[int, int, int]:
    n_train = int(np.floor(ratios[0] * n + 1e-9))
    n_val = int(np.floor(ratios[1] * n + 1e-9))
    return n_train, n_val, n - n_train - n_val


def _apportion(sizes: np.ndarray, total: int, frac: float, cap: np.ndarray) -> np.ndarray:
    quota = sizes * frac
    out = np.minimum(np.floor(quota).astype(int), cap)
    rem = total - out.sum()
    order = np.argsort(-(quota - np.floor(quota)), kind="stable")
    while rem > 0:
        progressed = False
        for k in order:
            if rem == 0:
                break
            if out[k] < cap[k]:
                out[k] += 1
                rem -= 1
                progressed = True
        if not progressed:
            break
    return out


def split_indices(y, s, seed: int, ratios=SPLIT_RATIOS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    y = np.asarray(y)
    s = np.asarray(s)
    n = len(y)
    if n < 20:
        raise DegenerateDataError(f"need at least 20 rows to split, got {n}")
    rng = make_rng(seed, SPLIT_STREAM)
    n_train, n_val, _ = split_sizes(n, ratios)
    strata = (2 * y + s).astype(int)
    present = [k for k in range(4) if np.any(strata == k)]
    sizes = np.array([np.sum(strata == k) for k in present])
    if sizes.min() < 3:
        warnings.warn("a (y, s) stratum has fewer than 3 rows; falling back to a plain shuffle", stacklevel=2)
        perm = rng.permutation(n)
        return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]
    members = [rng.permutation(np.flatnonzero(strata == k)) for k in present]
    k_train = _apportion(sizes, n_train, ratios[0], sizes)
    k_val = _apportion(sizes, n_val, ratios[1], sizes - k_train)
    tr = np.concatenate([m[:a] for m, a in zip(members, k_train)])
    va = np.concatenate([m[a:a + b] for m, a, b in zip(members, k_train, k_val)])
    te = np.concatenate([m[a + b:] for m, a, b in zip(members, k_train, k_val)])
    return rng.permutation(tr), rng.permutation(va), rng.permutation(te)


def split(dataset: TabularDataset, seed: int) -> SplitSet:
    """Deterministic 70/15/15 split stratified on the joint (y, s) cell."""
    tr, va, te = split_indices(dataset.y, dataset.s, seed)
    return SplitSet(dataset.subset(tr), dataset.subset(va), dataset.subset(te), seed)


def prepare_splits(dataset: TabularDataset, seed: int) -> SplitSet:
    """Split then standardize with train statistics."""
    return standardize(split(dataset, seed))
