"""Columnar warehouse store: dimension tables with dense surrogates, fact columns,
epoch bookkeeping and filtered scans.

Writes go through a single exclusive writer (`apply_load` or the granular
insert ops); readers take a `StoreView`, a reference snapshot of the committed
state. Fact columns are replaced (never mutated) on commit and dimension
tables only append, so a view stays internally consistent without locking.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import QueryError, StoreError
from .schema import DimensionDef, StarSchema, TIME_DIMENSION

UNKNOWN_KEY = 0
UNKNOWN_LABEL = "UNKNOWN"


def day_attributes(day: str) -> dict[str, str]:
    """Calendar roll-up attributes for an ISO day: month, quarter, year."""
    d = date.fromisoformat(day)
    quarter = (d.month - 1) // 3 + 1
    return {
        "day": day,
        "month": f"{d.year:04d}-{d.month:02d}",
        "quarter": f"{d.year:04d}-Q{quarter}",
        "year": f"{d.year:04d}",
    }


@dataclass
class LevelIndex:
    """Dense ids for the members of one (dimension, level).

    At the finest level ids are the surrogates themselves; at coarser levels
    ids are assigned 1..K over the distinct key values in ascending byte order.
    Id 0 is the UNKNOWN member at every level. ``codes[s]`` maps a surrogate to
    its id at this level.
    """

    dimension: str
    level: str
    keys: list  # id -> level key value (keys[0] is None: UNKNOWN)
    labels: list[str]  # id -> display label
    codes: np.ndarray  # surrogate -> id, int32
    by_key: dict  # key value -> id
    _sort_rank: Optional[np.ndarray] = None
    _keys_arr: Optional[np.ndarray] = None
    _labels_arr: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.keys)

    @property
    def sort_rank(self) -> np.ndarray:
        """rank[id] = position under (label, key) byte order; display sorting."""
        if self._sort_rank is None:
            order = sorted(range(self.size), key=lambda i: (self.labels[i], str(self.keys[i])))
            rank = np.empty(self.size, dtype=np.int32)
            for pos, member_id in enumerate(order):
                rank[member_id] = pos
            self._sort_rank = rank
        return self._sort_rank

    @property
    def keys_arr(self) -> np.ndarray:
        """Object-dtype copy of keys for C-speed gathers when building grids."""
        if self._keys_arr is None:
            arr = np.empty(self.size, dtype=object)
            arr[:] = self.keys
            self._keys_arr = arr
        return self._keys_arr

    @property
    def labels_arr(self) -> np.ndarray:
        if self._labels_arr is None:
            arr = np.empty(self.size, dtype=object)
            arr[:] = self.labels
            self._labels_arr = arr
        return self._labels_arr


class DimensionTable:
    """Members of one dimension: surrogate 0 is the reserved UNKNOWN member."""

    def __init__(self, dimension: DimensionDef):
        self.dimension = dimension
        self.columns: dict[str, list] = {}
        for attr, kind in dimension.member_attributes:
            self.columns[attr] = [UNKNOWN_LABEL if kind == "text" else 0]
        self._index: dict[str, int] = {}
        self._version = 0
        self._level_cache: dict[str, tuple[int, LevelIndex]] = {}

    @property
    def member_count(self) -> int:
        """Members excluding the UNKNOWN sentinel."""
        return len(self.columns[self.dimension.natural_key]) - 1

    def surrogate(self, natural_key) -> Optional[int]:
        return self._index.get(natural_key)

    def natural_keys(self) -> list:
        return self.columns[self.dimension.natural_key][1:]

    def attribute(self, surrogate: int, name: str):
        return self.columns[name][surrogate]

    def insert(self, rows: list[dict]) -> int:
        """Append members for new natural keys; existing keys are left untouched.

        Validates every row before appending anything, so a bad row leaves the
        table unchanged.
        """
        key_attr = self.dimension.natural_key
        expected = set(self.dimension.attribute_names)
        for row in rows:
            missing = expected - row.keys()
            if missing:
                raise StoreError(
                    f"dimension {self.dimension.name!r}: row missing attribute(s) "
                    f"{', '.join(sorted(missing))}"
                )
            extra = set(row.keys()) - expected
            if extra:
                raise StoreError(
                    f"dimension {self.dimension.name!r}: row has unknown attribute(s) "
                    f"{', '.join(sorted(extra))}"
                )
        inserted = 0
        for row in rows:
            key = row[key_attr]
            if key in self._index:
                continue
            self._index[key] = len(self.columns[key_attr])
            for attr in self.dimension.attribute_names:
                self.columns[attr].append(row[attr])
            inserted += 1
        if inserted:
            self._version += 1
            self._level_cache.clear()
        return inserted

    def level_index(self, level_name: str) -> LevelIndex:
        cached = self._level_cache.get(level_name)
        if cached is not None and cached[0] == self._version:
            return cached[1]
        lv = self.dimension.level(level_name)
        key_col = self.columns[lv.key_attribute]
        label_col = self.columns[lv.label_attribute]
        n = len(key_col)
        if lv.ordinal == 0:
            keys = [None] + key_col[1:]
            labels = [UNKNOWN_LABEL] + [str(v) for v in label_col[1:]]
            codes = np.arange(n, dtype=np.int32)
            by_key = dict(self._index)
        else:
            distinct = sorted(set(key_col[1:]), key=str)
            by_key = {k: i + 1 for i, k in enumerate(distinct)}
            keys = [None] + distinct
            labels = [UNKNOWN_LABEL] + [""] * len(distinct)
            codes = np.zeros(n, dtype=np.int32)
            for s in range(1, n):
                code = by_key[key_col[s]]
                codes[s] = code
                label = str(label_col[s])
                if labels[code] == "":
                    labels[code] = label
                elif labels[code] != label:
                    raise StoreError(
                        f"dimension {self.dimension.name!r} level {level_name!r}: key "
                        f"{key_col[s]!r} maps to conflicting labels "
                        f"{labels[code]!r} / {label!r}"
                    )
        index = LevelIndex(self.dimension.name, level_name, keys, labels, codes, by_key)
        self._level_cache[level_name] = (self._version, index)
        return index

    def rollup_map(self, fine_level: str, coarse_level: str) -> np.ndarray:
        """Array mapping fine-level ids to coarse-level ids (0 stays 0)."""
        cache_key = f"{fine_level}->{coarse_level}"
        cached = self._level_cache.get(cache_key)
        if cached is not None and cached[0] == self._version:
            return cached[1]
        fine = self.level_index(fine_level)
        coarse = self.level_index(coarse_level)
        out = np.zeros(fine.size, dtype=np.int32)
        out[fine.codes] = coarse.codes
        # the hierarchy must be functional: one coarse member per fine member
        packed = fine.codes.astype(np.int64) * coarse.size + coarse.codes
        if np.unique(packed).size != np.unique(fine.codes).size:
            raise StoreError(
                f"dimension {self.dimension.name!r}: level {fine_level!r} does not roll "
                f"up functionally to {coarse_level!r}"
            )
        self._level_cache[cache_key] = (self._version, out)
        return out


@dataclass(frozen=True)
class FactColumnset:
    """Immutable fact storage: one surrogate column per dimension plus the measure."""

    keys: dict[str, np.ndarray]  # dimension name -> int32 surrogates
    amounts: np.ndarray  # int64 millimes

    @property
    def row_count(self) -> int:
        return int(self.amounts.shape[0])


@dataclass
class WarehouseMeta:
    epoch: int = 0
    batch_fingerprints: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class FilterClause:
    dimension: str
    level: str
    members: frozenset


@dataclass(frozen=True)
class ScanFilter:
    clauses: tuple[FilterClause, ...] = ()
    time_range: Optional[tuple[str, str]] = None  # inclusive ISO day bounds

    @staticmethod
    def of(*clauses: FilterClause, time_range=None) -> "ScanFilter":
        return ScanFilter(clauses=tuple(clauses), time_range=time_range)


@dataclass(frozen=True)
class FactRowView:
    keys: dict[str, int]
    amount: int


class StoreView:
    """A committed snapshot: safe for concurrent reads while loads proceed."""

    def __init__(self, schema: StarSchema, dims: dict[str, DimensionTable],
                 facts: FactColumnset, epoch: int):
        self.schema = schema
        self.dims = dims
        self.facts = facts
        self.epoch = epoch

    def dim(self, name: str) -> DimensionTable:
        try:
            return self.dims[name]
        except KeyError:
            raise StoreError(f"unknown dimension {name!r}") from None

    def filter_mask(self, filt: Optional[ScanFilter]) -> Optional[np.ndarray]:
        """Boolean row mask for a filter, or None when the filter accepts everything."""
        if filt is None:
            return None
        mask: Optional[np.ndarray] = None
        clauses = list(filt.clauses)
        if filt.time_range is not None:
            if not self.schema.has_dimension(TIME_DIMENSION):
                raise QueryError("time_range requires a time dimension", field="time_range")
            lo, hi = filt.time_range
            table = self.dim(TIME_DIMENSION)
            day_index = table.level_index("day")
            accepted = frozenset(k for k in day_index.by_key if lo <= k <= hi)
            clauses.append(FilterClause(TIME_DIMENSION, "day", accepted))
        for clause in clauses:
            table = self.dim(clause.dimension)
            index = table.level_index(clause.level)
            accept = np.zeros(index.size, dtype=bool)
            for member in clause.members:
                code = index.by_key.get(member)
                if code is None:
                    raise QueryError(
                        f"unknown member {member!r} at {clause.dimension}.{clause.level}",
                        field="filters",
                    )
                accept[code] = True
            fk = self.facts.keys[clause.dimension]
            clause_mask = accept[index.codes[fk]]
            mask = clause_mask if mask is None else (mask & clause_mask)
        return mask

    def scan(self, filt: Optional[ScanFilter] = None) -> Iterator[FactRowView]:
        """Yield fact rows whose members satisfy every clause at that clause's level."""
        mask = self.filter_mask(filt)
        rows = range(self.facts.row_count) if mask is None else np.flatnonzero(mask)
        keys = self.facts.keys
        amounts = self.facts.amounts
        dims = self.schema.dimension_names
        for i in rows:
            yield FactRowView(
                keys={d: int(keys[d][i]) for d in dims},
                amount=int(amounts[i]),
            )

    def scan_count(self, filt: Optional[ScanFilter] = None) -> int:
        mask = self.filter_mask(filt)
        return self.facts.row_count if mask is None else int(mask.sum())


class ColumnStore:
    """Mutable warehouse state guarded by an exclusive writer lock."""

    def __init__(self, schema: StarSchema):
        self.schema = schema
        self._dims = {d.name: DimensionTable(d) for d in schema.dimensions}
        self._facts = FactColumnset(
            keys={d.name: np.empty(0, dtype=np.int32) for d in schema.dimensions},
            amounts=np.empty(0, dtype=np.int64),
        )
        self.meta = WarehouseMeta()
        # reentrant: a pipeline holds the writer role for its whole run and the
        # granular insert ops re-acquire underneath it
        self._write_lock = threading.RLock()
        self._commit_listeners: list[Callable[[int], None]] = []

    # -- read side ----------------------------------------------------------

    @property
    def epoch(self) -> int:
        return self.meta.epoch

    def view(self) -> StoreView:
        return StoreView(self.schema, self._dims, self._facts, self.meta.epoch)

    def dim(self, name: str) -> DimensionTable:
        try:
            return self._dims[name]
        except KeyError:
            raise StoreError(f"unknown dimension {name!r}") from None

    def on_commit(self, listener: Callable[[int], None]) -> None:
        self._commit_listeners.append(listener)

    def exclusive_writer(self):
        """Hold the writer role across a multi-step load (staging + commit)."""
        return self._write_lock

    # -- write side ---------------------------------------------------------

    def insert_members(self, dimension: str, rows: list[dict]) -> int:
        """Append new members; commits (and bumps the epoch) if anything changed."""
        with self._write_lock:
            inserted = self.dim(dimension).insert(rows)
            if inserted:
                self._commit_locked()
        return inserted

    def insert_facts(self, rows: list[dict]) -> tuple[int, int]:
        """Translate natural keys to surrogates and append; returns (inserted, rejected).

        Unresolved keys reject the row. Rows for the time dimension materialize
        missing day members on the fly.
        """
        inserted_rows: dict[str, list[int]] = {d: [] for d in self.schema.dimension_names}
        amounts: list[int] = []
        rejected = 0
        measure = self.schema.fact.measures[0].name
        with self._write_lock:
            for row in rows:
                translated = {}
                ok = True
                for dim_name, col in self.schema.fact.dimension_keys:
                    natural = row.get(col)
                    surrogate = self._resolve_key_locked(dim_name, natural)
                    if surrogate is None:
                        rejected += 1
                        ok = False
                        break
                    translated[dim_name] = surrogate
                if not ok:
                    continue
                try:
                    amount = int(row[measure])
                except (KeyError, TypeError, ValueError):
                    rejected += 1
                    continue
                for d, s in translated.items():
                    inserted_rows[d].append(s)
                amounts.append(amount)
            inserted = len(amounts)
            if inserted:
                self._append_fact_columns_locked(
                    {d: np.asarray(v, dtype=np.int32) for d, v in inserted_rows.items()},
                    np.asarray(amounts, dtype=np.int64),
                )
                self._commit_locked()
        return inserted, rejected

    def insert_fact_columns(self, keys: dict[str, np.ndarray], amounts: np.ndarray,
                            fingerprint: Optional[str] = None) -> int:
        """Bulk columnar append of already-translated surrogates (ETL / synthetic loads)."""
        with self._write_lock:
            n = self._validate_columns_locked(keys, amounts)
            if n:
                self._append_fact_columns_locked(keys, amounts)
            if fingerprint is not None:
                self.meta.batch_fingerprints.append(fingerprint)
            if n:
                self._commit_locked()
        return n

    def apply_load(self, dim_rows: dict[str, list[dict]], fact_keys: dict[str, np.ndarray],
                   fact_amounts: np.ndarray, fingerprints: list[str]) -> tuple[int, int]:
        """Atomic pipeline commit: members first, then facts, one epoch bump."""
        with self._write_lock:
            members_added = 0
            for dim_name, rows in dim_rows.items():
                members_added += self.dim(dim_name).insert(rows)
            facts_added = self._validate_columns_locked(fact_keys, fact_amounts)
            if facts_added:
                self._append_fact_columns_locked(fact_keys, fact_amounts)
            self.meta.batch_fingerprints.extend(fingerprints)
            if members_added or facts_added:
                self._commit_locked()
        return members_added, facts_added

    def ensure_day_member(self, day: str) -> Optional[int]:
        """Materialize a calendar day member; returns its surrogate (None if invalid)."""
        with self._write_lock:
            return self._resolve_key_locked(TIME_DIMENSION, day)

    # -- internals ----------------------------------------------------------

    def _resolve_key_locked(self, dim_name: str, natural) -> Optional[int]:
        if natural is None:
            return None
        table = self.dim(dim_name)
        surrogate = table.surrogate(natural)
        if surrogate is None and dim_name == TIME_DIMENSION:
            try:
                attrs = day_attributes(str(natural))
            except ValueError:
                return None
            table.insert([attrs])
            surrogate = table.surrogate(attrs["day"])
        return surrogate

    def _validate_columns_locked(self, keys: dict[str, np.ndarray], amounts: np.ndarray) -> int:
        n = int(amounts.shape[0])
        expected = set(self.schema.dimension_names)
        if set(keys) != expected:
            raise StoreError("fact columns must cover exactly the schema dimensions")
        for d, col in keys.items():
            if col.shape[0] != n:
                raise StoreError(f"fact column {d!r} length {col.shape[0]} != {n}")
            count = self._dims[d].member_count
            if n and (col.min() < 0 or col.max() > count):
                raise StoreError(f"fact column {d!r} has out-of-range surrogates")
        return n

    def _append_fact_columns_locked(self, keys: dict[str, np.ndarray], amounts: np.ndarray):
        old = self._facts
        self._facts = FactColumnset(
            keys={
                d: np.concatenate([old.keys[d], keys[d].astype(np.int32)])
                for d in self.schema.dimension_names
            },
            amounts=np.concatenate([old.amounts, amounts.astype(np.int64)]),
        )

    def _commit_locked(self):
        self.meta.epoch += 1
        for listener in list(self._commit_listeners):
            listener(self.meta.epoch)
