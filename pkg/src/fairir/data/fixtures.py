"""Bundled datasets: the German credit fixture and a synthetic biased generator."""
from __future__ import annotations

from importlib import resources

import numpy as np

from ..dist import make_rng
from .schema import Schema, load_schema
from .tabular import TabularDataset, load_csv, dummy_code

SYNTHETIC_STREAM = 202


def fixture_path(name: str):
    return resources.files(__package__).joinpath("fixtures", name)


def german_schema(sensitive: str = "sex") -> Schema:
    if sensitive not in ("sex", "age"):
        raise ValueError("sensitive must be 'sex' or 'age'")
    with resources.as_file(fixture_path(f"german_{sensitive}.json")) as p:
        return load_schema(p)


def adult_schema() -> Schema:
    with resources.as_file(fixture_path("adult.json")) as p:
        return load_schema(p)


def german_raw(sensitive: str = "sex"):
    schema = german_schema(sensitive)
    with resources.as_file(fixture_path("german_credit.csv")) as p:
        return load_csv(p, schema), schema


def load_german(sensitive: str = "sex") -> TabularDataset:
    """German credit, 1,000 rows x 58 dummy-coded features; ``s`` is sex or age >= 25."""
    raw, schema = german_raw(sensitive)
    ds = dummy_code(raw, schema)
    ds.provenance["source"] = "fixture:german_credit.csv"
    return ds


def make_synthetic(n: int = 1000, bias: float = 0.8, segment_frac: float = 0.3, n_planted: int = 10,
                   n_informative: int = 5, proxy_strength: float = 6.0, label_noise: float = 0.5,
                   include_sensitive: bool = False, seed: int = 0) -> TabularDataset:
    """Binary task whose labels are overwritten by the sensitive attribute inside one visible segment.

    Clean labels come from a linear rule on ``n_informative`` Gaussian
    features. A fraction ``segment_frac`` of rows forms a segment (flagged by
    the ``segment`` feature) in which a proxy feature reveals the group,
    ``proxy = proxy_strength * (2s - 1) + N(0, 1)``, and each label is replaced
    by ``s`` with probability ``bias``. Outside the segment the proxy is pure
    noise and labels are clean, so the group is hidden there. ``n_planted``
    further segment rows whose clean label disagrees with ``s`` (and were not
    already overwritten) get ``y := s``; their indices are stored in
    ``provenance["planted"]``, the overwritten ones in ``provenance["biased"]``.
    """
    rng = make_rng(seed, SYNTHETIC_STREAM)
    s = (rng.random(n) < 0.5).astype(np.float64)
    segment = (rng.random(n) < segment_frac).astype(np.float64)
    X_inf = rng.standard_normal((n, n_informative))
    coef = np.linspace(1.0, 0.2, n_informative)
    score = X_inf @ coef + label_noise * rng.standard_normal(n)
    y_clean = (score > 0).astype(np.float64)
    y = y_clean.copy()
    biased = (segment == 1) & (rng.random(n) < bias)
    y[biased] = s[biased]
    candidates = np.flatnonzero((segment == 1) & ~biased & (y_clean != s))
    planted = np.sort(rng.choice(candidates, size=min(n_planted, candidates.size), replace=False))
    y[planted] = s[planted]
    proxy = segment * proxy_strength * (2 * s - 1) + rng.standard_normal(n)
    cols = [X_inf, segment[:, None], proxy[:, None]]
    names = [f"x{i}" for i in range(n_informative)] + ["segment", "proxy"]
    numeric = [True] * n_informative + [False, True]
    if include_sensitive:
        cols.append(s[:, None])
        names.append("s")
        numeric.append(False)
    ds = TabularDataset(X=np.hstack(cols), y=y, s=s, feature_names=names, numeric_mask=np.array(numeric),
                        provenance={"source": f"synthetic(n={n},bias={bias},segment={segment_frac},"
                                              f"planted={n_planted},seed={seed})",
                                    "planted": planted.tolist(), "biased": np.flatnonzero(biased).tolist()})
    ds.check_nondegenerate()
    return ds
