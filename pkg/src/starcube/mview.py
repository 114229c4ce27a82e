"""Materialized-view catalog: named pre-aggregations, staleness against the store
epoch, on-demand refresh, and transparent query rewrite.

A view always stores (sum, count) cells regardless of its declared measures,
so sum, count and average all stay derivable when a query is rewritten.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from .cube import Cuboid, GroupBySpec, build_cuboid
from .errors import MViewError, StaleViewError
from .schema import StarSchema
from .store import ScanFilter, StoreView

REFRESH_MODES = ("on_demand",)


@dataclass(frozen=True)
class MViewDef:
    name: str
    spec: GroupBySpec
    measures: tuple[tuple[str, str], ...]  # (aggregator, measure name)
    rewrite_enabled: bool = True
    refresh_mode: str = "on_demand"


@dataclass
class MViewState:
    data: Cuboid
    built_epoch: int


@dataclass(frozen=True)
class RewritePlan:
    """How to answer a query from a view: which view, plus the residual coarsening."""

    view: str
    residual_spec: GroupBySpec  # the query's grouping, applied over view cells
    residual_filter: Optional[ScanFilter]
    cells: int


@dataclass
class _Entry:
    definition: MViewDef
    state: Optional[MViewState] = None


class MViewCatalog:
    """Single-writer catalog (define/refresh/invalidate) with concurrent readers."""

    def __init__(self, schema: StarSchema):
        self.schema = schema
        self._entries: dict[str, _Entry] = {}
        self._lock = threading.Lock()

    # -- definitions ----------------------------------------------------------

    def define(self, definition: MViewDef) -> None:
        definition.spec.validate(self.schema)
        if not definition.measures:
            raise MViewError(f"view {definition.name!r} declares no measures")
        for agg, measure in definition.measures:
            try:
                self.schema.measure(measure)
            except KeyError:
                raise MViewError(
                    f"view {definition.name!r}: unknown measure {measure!r}"
                ) from None
            if agg not in ("sum", "count", "average"):
                raise MViewError(f"view {definition.name!r}: unknown aggregator {agg!r}")
        if definition.refresh_mode not in REFRESH_MODES:
            raise MViewError(
                f"view {definition.name!r}: unsupported refresh mode "
                f"{definition.refresh_mode!r}"
            )
        with self._lock:
            if definition.name in self._entries:
                raise MViewError(f"view {definition.name!r} already defined")
            self._entries[definition.name] = _Entry(definition)

    def redefine(self, definition: MViewDef) -> None:
        """Replace a definition (dropping any built state); define if absent."""
        with self._lock:
            self._entries.pop(definition.name, None)
        self.define(definition)

    def restore(self, definition: MViewDef, state: Optional[MViewState]) -> None:
        """Snapshot-load path: register a definition together with its built state."""
        self.define(definition)
        with self._lock:
            self._entries[definition.name].state = state

    def names(self) -> list[str]:
        return list(self._entries)

    def definition(self, name: str) -> MViewDef:
        return self._entry(name).definition

    def _entry(self, name: str) -> _Entry:
        try:
            return self._entries[name]
        except KeyError:
            raise MViewError(f"unknown view {name!r}") from None

    # -- state ----------------------------------------------------------------

    def state(self, name: str) -> Optional[MViewState]:
        return self._entry(name).state

    def is_stale(self, name: str, store_epoch: int) -> bool:
        """Unbuilt or built at another epoch counts as stale."""
        state = self._entry(name).state
        return state is None or state.built_epoch != store_epoch

    def refresh(self, name: str, view: StoreView) -> MViewState:
        entry = self._entry(name)
        data = build_cuboid(view, entry.definition.spec)
        state = MViewState(data=data, built_epoch=view.epoch)
        with self._lock:
            entry.state = state
        return state

    def refresh_stale(self, view: StoreView) -> int:
        """Refresh every stale view; returns how many were rebuilt."""
        refreshed = 0
        for name in self.names():
            if self.is_stale(name, view.epoch):
                self.refresh(name, view)
                refreshed += 1
        return refreshed

    def mark_stale_on_commit(self, new_epoch: int) -> int:
        """Count built views invalidated by a commit (staleness is epoch-derived)."""
        marked = 0
        for entry in self._entries.values():
            if entry.state is not None and entry.state.built_epoch != new_epoch:
                marked += 1
        return marked

    def describe(self, store_epoch: int) -> list[dict]:
        out = []
        for name, entry in self._entries.items():
            d = entry.definition
            out.append(
                {
                    "name": name,
                    "group_by": dict(d.spec.grouped(self.schema)),
                    "measures": [list(m) for m in d.measures],
                    "rewrite_enabled": d.rewrite_enabled,
                    "refresh_mode": d.refresh_mode,
                    "built_epoch": None if entry.state is None else entry.state.built_epoch,
                    "stale": self.is_stale(name, store_epoch),
                    "cells": 0 if entry.state is None else entry.state.data.n_cells,
                }
            )
        return out

    # -- rewrite ----------------------------------------------------------------

    def rewrite(self, query_spec: GroupBySpec, filters: Optional[ScanFilter],
                measures: tuple[tuple[str, str], ...], store_epoch: int) -> Optional[RewritePlan]:
        """Pick the cheapest fresh view that can answer the query, or None.

        Conditions: (a) the query grouping is equal-or-coarser than the view's
        per dimension; (b) every filtered dimension is grouped by the view at an
        equal-or-finer level than the filter's; (c) every query aggregator is
        derivable from stored (sum, count). Ties break by cell count then name.
        """
        candidates: list[tuple[int, str, RewritePlan]] = []
        for name, entry in self._entries.items():
            d = entry.definition
            if not d.rewrite_enabled:
                continue
            state = entry.state
            if state is None or state.built_epoch != store_epoch:
                continue
            if not query_spec.is_coarser_or_equal(d.spec):
                continue
            if not self._filters_covered(d.spec, filters):
                continue
            if not all(agg in ("sum", "count", "average") for agg, _ in measures):
                continue
            plan = RewritePlan(
                view=name,
                residual_spec=query_spec,
                residual_filter=filters,
                cells=state.data.n_cells,
            )
            candidates.append((state.data.n_cells, name, plan))
        if not candidates:
            return None
        candidates.sort(key=lambda t: (t[0], t[1]))
        return candidates[0][2]

    def _filters_covered(self, view_spec: GroupBySpec, filters: Optional[ScanFilter]) -> bool:
        if filters is None:
            return True
        if filters.time_range is not None:
            # an arbitrary day range needs day-grained time cells
            if not self.schema.has_dimension("time"):
                return False
            if view_spec.level_of(self.schema, "time") != "day":
                return False
        for clause in filters.clauses:
            view_level = view_spec.level_of(self.schema, clause.dimension)
            if view_level is None:
                return False
            dim = self.schema.dimension(clause.dimension)
            if dim.level(view_level).ordinal > dim.level(clause.level).ordinal:
                return False
        return True

    def cells_for(self, plan: RewritePlan, store_epoch: int) -> Cuboid:
        """The view cuboid backing a plan; raises StaleViewError on an epoch race."""
        entry = self._entry(plan.view)
        state = entry.state
        if state is None or state.built_epoch != store_epoch:
            raise StaleViewError(
                f"view {plan.view!r} is no longer fresh at epoch {store_epoch}"
            )
        return state.data
