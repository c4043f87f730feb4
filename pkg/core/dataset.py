# core/dataset.py
# y = 1 is a default; missing labels are NaN

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core.errors import DataError

log = logging.getLogger(__name__)

_TRUE = {"1", "1.0", "true", "yes", "y", "t"}
_FALSE = {"0", "0.0", "false", "no", "n", "f"}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinEdges:
    source_names: Tuple[str, ...]
    binned: Tuple[str, ...]
    edges: Tuple[np.ndarray, ...]

    def edges_for(self, name: str) -> np.ndarray:
        return self.edges[self.binned.index(name)]


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    financed: np.ndarray
    ids: Optional[np.ndarray] = None
    feature_names: Tuple[str, ...] = ()
    holdout_labels: Optional[np.ndarray] = None
    bin_edges: Optional[BinEdges] = field(default=None)

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"features must be a non-empty n x d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite feature values")
        n, d = x.shape

        y = np.asarray(self.labels, dtype=float).reshape(-1)
        f = np.asarray(self.financed, dtype=bool).reshape(-1)
        if y.shape[0] != n or f.shape[0] != n:
            raise DataError(f"labels ({y.shape[0]}) and financed ({f.shape[0]}) must have n={n} entries")
        present = ~np.isnan(y)
        if not np.array_equal(present, f):
            raise DataError("labels must be present exactly on financed records")
        if not np.all(np.isin(y[present], (0.0, 1.0))):
            raise DataError("label values outside {0,1}")

        ids = np.arange(n).astype(str) if self.ids is None else np.asarray(self.ids).astype(str)
        if ids.shape[0] != n:
            raise DataError(f"ids must have n={n} entries")

        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise DataError(f"feature_names has {len(names)} entries for d={d}")

        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "financed", _frozen(f))
        object.__setattr__(self, "ids", _frozen(ids))
        object.__setattr__(self, "feature_names", names)
        if self.holdout_labels is not None:
            h = np.asarray(self.holdout_labels, dtype=float).reshape(-1)
            if h.shape[0] != n:
                raise DataError(f"holdout_labels must have n={n} entries")
            object.__setattr__(self, "holdout_labels", _frozen(h))

    @classmethod
    def fully_labeled(
        cls,
        features: np.ndarray,
        labels: np.ndarray,
        ids: Optional[Sequence[str]] = None,
        feature_names: Sequence[str] = (),
    ) -> "Dataset":
        y = np.asarray(labels, dtype=float)
        return cls(features, y, np.ones(y.shape[0], dtype=bool), ids=ids, feature_names=tuple(feature_names))

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_financed(self) -> int:
        return int(self.financed.sum())

    @property
    def x_f(self) -> np.ndarray:
        return self.features[self.financed]

    @property
    def y_f(self) -> np.ndarray:
        return self.labels[self.financed].astype(int)

    @property
    def x_nf(self) -> np.ndarray:
        return self.features[~self.financed]

    @property
    def all_labeled(self) -> bool:
        return bool(self.financed.all())

    def masked(self, financed: np.ndarray) -> "Dataset":
        """Hide labels outside `financed`; requires those labels to be known now."""
        financed = np.asarray(financed, dtype=bool)
        if financed.shape[0] != self.n:
            raise DataError("financing mask has the wrong length")
        if np.any(financed & ~self.financed):
            raise DataError("cannot finance a record whose label is unknown")
        y = np.where(financed, self.labels, np.nan)
        return replace(self, labels=y, financed=financed)

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows)
        hold = None if self.holdout_labels is None else self.holdout_labels[rows]
        return replace(
            self,
            features=self.features[rows],
            labels=self.labels[rows],
            financed=self.financed[rows],
            ids=self.ids[rows],
            holdout_labels=hold,
        )


class SchemaConfig(BaseModel):
    """Column mapping for CSV ingestion, stored as its own JSON file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    id_column: Optional[str] = None
    label_column: str
    financed_column: str
    feature_columns: List[str] = Field(min_length=1)
    holdout_labels: bool = False

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SchemaConfig":
        p = Path(path)
        if not p.exists():
            raise DataError(f"schema file not found: {p}")
        try:
            return cls.model_validate(json.loads(p.read_text(encoding="utf-8")))
        except (ValueError, ValidationError) as e:
            raise DataError(f"invalid schema file {p}: {e}") from e


def _parse_flag(values: pd.Series, column: str) -> np.ndarray:
    norm = values.str.strip().str.lower()
    bad = ~(norm.isin(_TRUE) | norm.isin(_FALSE))
    if bad.any():
        raise DataError(f"unparseable financing flag in column {column!r}: {values[bad].iloc[0]!r}")
    return norm.isin(_TRUE).to_numpy()


def _parse_numeric(values: pd.Series, column: str) -> np.ndarray:
    try:
        out = pd.to_numeric(values.str.strip(), errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise DataError(f"unparseable numeric in column {column!r}: {e}") from e
    return out


def load_csv(path: Union[str, Path], schema: Union[SchemaConfig, str, Path]) -> Dataset:
    """Read an applicant CSV (UTF-8, comma separated, '.' decimals, header row)."""
    if not isinstance(schema, SchemaConfig):
        schema = SchemaConfig.from_file(schema)
    p = Path(path)
    if not p.exists():
        raise DataError(f"data file not found: {p}")
    try:
        df = pd.read_csv(p, sep=",", encoding="utf-8", dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DataError("empty dataset") from e
    if df.empty:
        raise DataError("empty dataset")

    needed = [schema.label_column, schema.financed_column, *schema.feature_columns]
    if schema.id_column:
        needed.append(schema.id_column)
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataError(f"missing columns: {', '.join(missing)}")

    financed = _parse_flag(df[schema.financed_column], schema.financed_column)

    raw = df[schema.label_column].str.strip()
    if (raw[financed] == "").any():
        raise DataError(f"financed records with empty label in column {schema.label_column!r}")
    labels = np.full(len(df), np.nan)
    labels[financed] = _parse_numeric(raw[financed], schema.label_column)

    holdout = None
    if schema.holdout_labels:
        holdout = np.full(len(df), np.nan)
        known = ~financed & (raw != "").to_numpy()
        holdout[known] = _parse_numeric(raw[known], schema.label_column)
        if not np.all(np.isin(holdout[known], (0.0, 1.0))):
            raise DataError("label values outside {0,1}")
    if not np.all(np.isin(labels[financed], (0.0, 1.0))):
        raise DataError("label values outside {0,1}")

    x = np.column_stack([_parse_numeric(df[c], c) for c in schema.feature_columns])
    ids = df[schema.id_column].to_numpy() if schema.id_column else None

    ds = Dataset(
        features=x,
        labels=labels,
        financed=financed,
        ids=ids,
        feature_names=tuple(schema.feature_columns),
        holdout_labels=holdout,
    )
    log.info("[data] loaded %s: n=%d d=%d financed=%d", p.name, ds.n, ds.d, ds.n_financed)
    return ds


def _quantile_edges(values: np.ndarray, bins: int, name: str) -> np.ndarray:
    """Inner cut points at j/bins quantiles, linear interpolation (numpy's default)."""
    if np.unique(values).size < bins:
        raise DataError(f"insufficient distinct values in column {name!r} for {bins} bins")
    edges = np.quantile(values, np.arange(1, bins) / bins, method="linear")
    if np.any(np.diff(edges) <= 0):
        raise DataError(f"insufficient distinct values in column {name!r} for {bins} bins")
    return edges


def _indicators(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # bin 0 is the reference level: values <= edges[0]
    idx = np.digitize(values, edges, right=True)
    return np.column_stack([(idx == j).astype(float) for j in range(1, edges.size + 1)])


def _encode(dataset: Dataset, bin_edges: BinEdges) -> Dataset:
    cols: List[np.ndarray] = []
    names: List[str] = []
    for j, name in enumerate(dataset.feature_names):
        x = dataset.features[:, j]
        if name in bin_edges.binned:
            edges = bin_edges.edges_for(name)
            cols.append(_indicators(x, edges))
            names.extend(f"{name}_bin{b}" for b in range(1, edges.size + 1))
        else:
            cols.append(x.reshape(-1, 1))
            names.append(name)
    return replace(dataset, features=np.hstack(cols), feature_names=tuple(names), bin_edges=bin_edges)


def discretize(dataset: Dataset, bins_per_feature: int, columns: Optional[Sequence[str]] = None) -> Dataset:
    """Equal-frequency binning into reference-coded indicator columns.

    Edges come from financed records only and are stored on the result so
    the same cut points can be applied to test data with `apply_bins`.
    """
    if bins_per_feature < 2:
        raise DataError("bins_per_feature must be >= 2")
    chosen = list(columns) if columns is not None else list(dataset.feature_names)
    unknown = [c for c in chosen if c not in dataset.feature_names]
    if unknown:
        raise DataError(f"unknown columns for discretization: {', '.join(unknown)}")
    if dataset.n_financed == 0:
        raise DataError("cannot discretize without financed records")

    edges = []
    for name in chosen:
        j = dataset.feature_names.index(name)
        edges.append(_frozen(_quantile_edges(dataset.x_f[:, j], bins_per_feature, name)))
    bin_edges = BinEdges(source_names=dataset.feature_names, binned=tuple(chosen), edges=tuple(edges))
    return _encode(dataset, bin_edges)


def apply_bins(dataset: Dataset, bin_edges: BinEdges) -> Dataset:
    if dataset.feature_names != bin_edges.source_names:
        raise DataError("dataset columns do not match the columns the bins were built on")
    return _encode(dataset, bin_edges)
