"""Column schemas for tabular fairness datasets."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IngestionError

KINDS = ("numeric", "categorical", "label", "sensitive", "binary")


@dataclass(frozen=True)
class ColumnSchema:
    """One CSV column and how it is encoded.

    ``binary`` columns become a single 0/1 indicator (1 for ``positive_value``);
    the label and sensitive columns map to {0, 1} through ``positive_label`` and
    ``privileged_value``.
    """

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    privileged_value: str | None = None
    positive_label: str | None = None
    positive_value: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise IngestionError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind != "numeric":
            if not self.categories:
                raise IngestionError(f"column {self.name!r}: categories must be non-empty")
            if len(set(self.categories)) != len(self.categories):
                raise IngestionError(f"column {self.name!r}: categories must be unique")
        if self.kind in ("label", "sensitive", "binary") and len(self.categories) != 2:
            raise IngestionError(f"column {self.name!r}: {self.kind} columns need exactly two categories")
        checks = {"sensitive": self.privileged_value, "label": self.positive_label, "binary": self.positive_value}
        if self.kind in checks and checks[self.kind] not in self.categories:
            raise IngestionError(f"column {self.name!r}: marker value {checks[self.kind]!r} is not a declared category")

    @property
    def width(self) -> int:
        if self.kind == "categorical":
            return len(self.categories)
        if self.kind in ("numeric", "binary"):
            return 1
        return 0

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.categories:
            d["categories"] = list(self.categories)
        for key in ("privileged_value", "positive_label", "positive_value"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


@dataclass(frozen=True)
class Schema:
    name: str
    columns: tuple[ColumnSchema, ...]
    sensitive_as_feature: bool = True
    _by_name: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        labels = [c for c in self.columns if c.kind == "label"]
        sens = [c for c in self.columns if c.kind == "sensitive"]
        if len(labels) != 1:
            raise IngestionError(f"schema {self.name!r} needs exactly one label column, found {len(labels)}")
        if len(sens) != 1:
            raise IngestionError(f"schema {self.name!r} needs exactly one sensitive column, found {len(sens)}")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise IngestionError(f"schema {self.name!r} has duplicate column names")
        object.__setattr__(self, "_by_name", {c.name: c for c in self.columns})

    def __getitem__(self, name: str) -> ColumnSchema:
        return self._by_name[name]

    @property
    def label(self) -> ColumnSchema:
        return next(c for c in self.columns if c.kind == "label")

    @property
    def sensitive(self) -> ColumnSchema:
        return next(c for c in self.columns if c.kind == "sensitive")

    @property
    def width(self) -> int:
        """Number of feature columns after dummy coding."""
        return sum(c.width for c in self.columns) + (1 if self.sensitive_as_feature else 0)

    def to_dict(self) -> dict:
        return {"name": self.name, "sensitive_as_feature": self.sensitive_as_feature,
                "columns": [c.to_dict() for c in self.columns]}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        unknown = set(d) - {"name", "sensitive_as_feature", "columns"}
        if unknown:
            raise IngestionError(f"unknown schema keys: {sorted(unknown)}")
        cols = []
        for c in d["columns"]:
            bad = set(c) - {"name", "kind", "categories", "privileged_value", "positive_label", "positive_value"}
            if bad:
                raise IngestionError(f"column {c.get('name')!r}: unknown keys {sorted(bad)}")
            cols.append(ColumnSchema(name=c["name"], kind=c["kind"], categories=tuple(c.get("categories", ())),
                                     privileged_value=c.get("privileged_value"),
                                     positive_label=c.get("positive_label"),
                                     positive_value=c.get("positive_value")))
        return cls(name=d.get("name", "unnamed"), columns=tuple(cols),
                   sensitive_as_feature=bool(d.get("sensitive_as_feature", True)))


def load_schema(path) -> Schema:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read schema {path}: {exc}") from exc
    return Schema.from_dict(d)
