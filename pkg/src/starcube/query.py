"""OLAP query model, plan selection (mview > cuboid > scan) and the navigation
algebra: roll up, drill down, slice, dice, pivot.

Every execution path reduces to the same cell set, so results are identical
whichever plan runs; the chosen plan only changes how much input is read.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .cube import Cuboid, GroupBySpec, build_cuboid
from .errors import NavigationError, QueryError, StaleViewError
from .schema import StarSchema, TIME_DIMENSION
from .store import FilterClause, ScanFilter, StoreView

PLAN_KINDS = ("mview", "cuboid", "scan")


@dataclass(frozen=True)
class AggregateQuery:
    measures: tuple[tuple[str, str], ...]  # (aggregator, measure name)
    group_by: tuple[tuple[str, str], ...] = ()  # (dimension, level); absent = ALL
    filters: tuple[FilterClause, ...] = ()
    time_range: Optional[tuple[str, str]] = None
    sort: Optional[tuple[str, str]] = None  # (column, "asc"|"desc")
    limit: Optional[int] = None

    def __post_init__(self):
        # canonical clause order: filter-set semantics, tuple equality
        ordered = tuple(sorted(self.filters, key=lambda c: (c.dimension, c.level)))
        if ordered != self.filters:
            object.__setattr__(self, "filters", ordered)

    def spec(self, schema: StarSchema) -> GroupBySpec:
        return GroupBySpec.from_levels(schema, dict(self.group_by))

    def scan_filter(self) -> Optional[ScanFilter]:
        if not self.filters and self.time_range is None:
            return None
        return ScanFilter(clauses=self.filters, time_range=self.time_range)

    def level_of(self, dimension: str) -> Optional[str]:
        for dim, level in self.group_by:
            if dim == dimension:
                return level
        return None

    def to_doc(self) -> dict:
        doc: dict = {
            "measures": [{"aggregator": a, "measure": m} for a, m in self.measures],
            "group_by": {d: l for d, l in self.group_by},
        }
        if self.filters:
            doc["filters"] = [
                {"dimension": c.dimension, "level": c.level, "members": sorted(c.members, key=str)}
                for c in self.filters
            ]
        if self.time_range is not None:
            doc["time_range"] = {"from": self.time_range[0], "to": self.time_range[1]}
        if self.sort is not None:
            doc["sort"] = {"column": self.sort[0], "direction": self.sort[1]}
        if self.limit is not None:
            doc["limit"] = self.limit
        return doc


def query_from_doc(schema: StarSchema, doc: dict) -> AggregateQuery:
    """Validate a query document; raises QueryError naming the offending field."""
    if not isinstance(doc, dict):
        raise QueryError("query document must be an object", field="query")

    measures_doc = doc.get("measures", [{"aggregator": "sum", "measure": schema.fact.measures[0].name}])
    if not isinstance(measures_doc, list) or not measures_doc:
        raise QueryError("measures must be a non-empty list", field="measures")
    measures = []
    for m in measures_doc:
        if not isinstance(m, dict) or "aggregator" not in m or "measure" not in m:
            raise QueryError("each measure needs aggregator and measure", field="measures")
        agg, name = m["aggregator"], m["measure"]
        if agg not in ("sum", "count", "average"):
            raise QueryError(f"unknown aggregator {agg!r}", field="measures")
        try:
            schema.measure(name)
        except KeyError:
            raise QueryError(f"unknown measure {name!r}", field="measures") from None
        measures.append((agg, name))

    group_by_doc = doc.get("group_by", {})
    if not isinstance(group_by_doc, dict):
        raise QueryError("group_by must be an object of dimension: level", field="group_by")
    group_by = []
    for dim_name, level_name in group_by_doc.items():
        if not schema.has_dimension(dim_name):
            raise QueryError(f"unknown dimension {dim_name!r}", field="group_by")
        dim = schema.dimension(dim_name)
        if not isinstance(level_name, str) or not dim.has_level(level_name):
            raise QueryError(
                f"dimension {dim_name!r} has no level {level_name!r}", field="group_by"
            )
        group_by.append((dim_name, level_name))
    # normalize to schema dimension order so identical queries compare equal
    order = {name: i for i, name in enumerate(schema.dimension_names)}
    group_by.sort(key=lambda dl: order[dl[0]])

    filters = []
    for i, f in enumerate(doc.get("filters", [])):
        where = f"filters[{i}]"
        if not isinstance(f, dict):
            raise QueryError("filter clause must be an object", field=where)
        dim_name = f.get("dimension")
        if not isinstance(dim_name, str) or not schema.has_dimension(dim_name):
            raise QueryError(f"unknown dimension {dim_name!r}", field=where)
        level_name = f.get("level")
        if not isinstance(level_name, str) or not schema.dimension(dim_name).has_level(level_name):
            raise QueryError(
                f"dimension {dim_name!r} has no level {level_name!r}", field=where
            )
        members = f.get("members")
        if not isinstance(members, list) or not members:
            raise QueryError("members must be a non-empty list", field=where)
        filters.append(FilterClause(dim_name, level_name, frozenset(members)))

    time_range = None
    tr = doc.get("time_range")
    if tr is not None:
        if not isinstance(tr, dict) or "from" not in tr or "to" not in tr:
            raise QueryError("time_range needs from and to", field="time_range")
        if not schema.has_dimension(TIME_DIMENSION):
            raise QueryError("schema has no time dimension", field="time_range")
        time_range = (str(tr["from"]), str(tr["to"]))

    sort = None
    sort_doc = doc.get("sort")
    if sort_doc is not None:
        if not isinstance(sort_doc, dict) or "column" not in sort_doc:
            raise QueryError("sort needs a column", field="sort")
        direction = sort_doc.get("direction", "asc")
        if direction not in ("asc", "desc"):
            raise QueryError(f"bad sort direction {direction!r}", field="sort")
        sort = (str(sort_doc["column"]), direction)

    limit = doc.get("limit")
    if limit is not None and (not isinstance(limit, int) or limit < 1):
        raise QueryError("limit must be a positive integer", field="limit")

    return AggregateQuery(
        measures=tuple(measures),
        group_by=tuple(group_by),
        filters=tuple(filters),
        time_range=time_range,
        sort=sort,
        limit=limit,
    )


@dataclass(frozen=True)
class Plan:
    kind: str  # mview | cuboid | scan
    detail: str  # view name, cuboid spec label, or fact table name
    estimated_rows: int


@dataclass(frozen=True)
class PlanInfo:
    kind: str
    detail: str
    input_rows: int
    elapsed_ms: float


class GridRow(NamedTuple):
    keys: tuple  # level key values, one per axis
    labels: tuple  # display labels, one per axis
    values: tuple  # one per measure column


@dataclass(frozen=True)
class ResultGrid:
    axes: tuple[tuple[str, str], ...]  # (dimension, level)
    measure_columns: tuple[str, ...]
    rows: tuple[GridRow, ...]
    plan: PlanInfo
    epoch: int

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(f"{d}.{l}" for d, l in self.axes) + self.measure_columns

    def measure_total(self, column: int = 0) -> int:
        return sum(r.values[column] for r in self.rows)

    def to_doc(self) -> dict:
        return {
            "axes": [{"dimension": d, "level": l} for d, l in self.axes],
            "columns": list(self.columns),
            "rows": [
                {"keys": list(r.keys), "labels": list(r.labels), "values": list(r.values)}
                for r in self.rows
            ],
            "plan": {
                "kind": self.plan.kind,
                "detail": self.plan.detail,
                "input_rows": self.plan.input_rows,
                "elapsed_ms": self.plan.elapsed_ms,
            },
            "epoch": self.epoch,
        }


def measure_column_name(aggregator: str, measure: str) -> str:
    return f"{aggregator}({measure})"


# ---------------------------------------------------------------------------
# Planning


class _Engine:
    """Duck-typed engine contract used by the executor (see engine.Engine)."""

    schema: StarSchema
    # view() -> StoreView ; mviews: MViewCatalog ; cuboids() -> dict[GroupBySpec, Cuboid]


def plan_query(engine, query: AggregateQuery, force: Optional[str] = None) -> Plan:
    """Choose mview, then cuboid, then scan; ``force`` restricts to one kind."""
    if force is not None and force not in PLAN_KINDS:
        raise QueryError(f"unknown plan kind {force!r}")
    view = engine.view()
    spec = query.spec(engine.schema)
    filt = query.scan_filter()

    if force in (None, "mview"):
        rw = engine.mviews.rewrite(spec, filt, query.measures, view.epoch)
        if rw is not None:
            return Plan(kind="mview", detail=rw.view, estimated_rows=rw.cells)
        if force == "mview":
            raise QueryError("no materialized view can answer this query")

    if force in (None, "cuboid"):
        best: Optional[tuple[int, str, Cuboid]] = None
        for cuboid in engine.cuboids().values():
            if cuboid.epoch != view.epoch:
                continue
            if not spec.is_coarser_or_equal(cuboid.spec):
                continue
            if not _filters_covered(engine.schema, cuboid.spec, filt):
                continue
            key = (cuboid.n_cells, cuboid.spec.label(engine.schema))
            if best is None or key < (best[0], best[1]):
                best = (cuboid.n_cells, cuboid.spec.label(engine.schema), cuboid)
        if best is not None:
            return Plan(kind="cuboid", detail=best[1], estimated_rows=best[0])
        if force == "cuboid":
            raise QueryError("no built cuboid can answer this query")

    return Plan(kind="scan", detail=engine.schema.fact.name,
                estimated_rows=view.facts.row_count)


def _filters_covered(schema: StarSchema, source_spec: GroupBySpec,
                     filt: Optional[ScanFilter]) -> bool:
    if filt is None:
        return True
    if filt.time_range is not None:
        if source_spec.level_of(schema, TIME_DIMENSION) != "day":
            return False
    for clause in filt.clauses:
        source_level = source_spec.level_of(schema, clause.dimension)
        if source_level is None:
            return False
        dim = schema.dimension(clause.dimension)
        if dim.level(source_level).ordinal > dim.level(clause.level).ordinal:
            return False
    return True


# ---------------------------------------------------------------------------
# Execution


def _cells_execute(source: Cuboid, spec: GroupBySpec, filt: Optional[ScanFilter],
                   view: StoreView) -> Cuboid:
    """Filter a source cuboid's cells, then re-aggregate them at the query levels."""
    if filt is None and spec == source.spec:
        return source
    grouped = spec.grouped(view.schema)
    source_pos = {d: i for i, d in enumerate(source.dims)}

    mask: Optional[np.ndarray] = None
    if filt is not None:
        clauses = list(filt.clauses)
        if filt.time_range is not None:
            lo, hi = filt.time_range
            day_index = view.dim(TIME_DIMENSION).level_index("day")
            accept = np.array(
                [k is not None and lo <= k <= hi for k in day_index.keys], dtype=bool
            )
            codes = source.coords[source_pos[TIME_DIMENSION]]
            m = accept[codes]
            mask = m if mask is None else (mask & m)
        for clause in clauses:
            table = view.dim(clause.dimension)
            clause_index = table.level_index(clause.level)
            accept = np.zeros(clause_index.size, dtype=bool)
            for member in clause.members:
                code = clause_index.by_key.get(member)
                if code is None:
                    raise QueryError(
                        f"unknown member {member!r} at {clause.dimension}.{clause.level}",
                        field="filters",
                    )
                accept[code] = True
            source_level = source.levels[source_pos[clause.dimension]]
            codes = source.coords[source_pos[clause.dimension]]
            if source_level != clause.level:
                codes = table.rollup_map(source_level, clause.level)[codes]
            m = accept[codes]
            mask = m if mask is None else (mask & m)

    sums = source.sums if mask is None else source.sums[mask]
    counts = source.counts if mask is None else source.counts[mask]

    code_columns: list[np.ndarray] = []
    radices: list[int] = []
    indexes = []
    for dim_name, level_name in grouped:
        table = view.dim(dim_name)
        index = table.level_index(level_name)
        pos = source_pos[dim_name]
        codes = source.coords[pos] if mask is None else source.coords[pos][mask]
        if source.levels[pos] != level_name:
            codes = table.rollup_map(source.levels[pos], level_name)[codes]
        code_columns.append(codes)
        radices.append(index.size)
        indexes.append(index)

    if not code_columns:
        if sums.shape[0] == 0:
            coords, out_sums, out_counts = (), np.empty(0, np.int64), np.empty(0, np.int64)
        else:
            coords = ()
            out_sums = np.asarray([sums.sum()], dtype=np.int64)
            out_counts = np.asarray([counts.sum()], dtype=np.int64)
    else:
        keys, bound = kernels.pack_codes(code_columns, radices)
        uniq, out_sums, out_counts = kernels.sum2_by_key(keys, sums, counts, bound)
        coords = tuple(kernels.unpack_codes(uniq, radices))

    return Cuboid(
        spec=spec,
        epoch=source.epoch,
        dims=tuple(d for d, _ in grouped),
        levels=tuple(l for _, l in grouped),
        coords=coords,
        sums=out_sums,
        counts=out_counts,
        indexes=tuple(indexes),
    )


def _grid_from_cells(result: Cuboid, query: AggregateQuery, plan: PlanInfo,
                     epoch: int) -> ResultGrid:
    axes = tuple(zip(result.dims, result.levels))
    measure_cols = tuple(measure_column_name(a, m) for a, m in query.measures)
    n = result.n_cells

    if result.coords:
        # per-axis (label, key) member ranks; lexsort's last key is primary
        ranks = [
            idx.sort_rank[codes]
            for idx, codes in zip(result.indexes, result.coords)
        ]
        order = np.lexsort(tuple(reversed(ranks)))
        ordered_coords = [codes[order] for codes in result.coords]
        key_cols = [
            idx.keys_arr.take(codes).tolist()
            for idx, codes in zip(result.indexes, ordered_coords)
        ]
        label_cols = [
            idx.labels_arr.take(codes).tolist()
            for idx, codes in zip(result.indexes, ordered_coords)
        ]
        keys_rows = list(zip(*key_cols))
        labels_rows = list(zip(*label_cols))
        sums = result.sums[order].tolist()
        counts = result.counts[order].tolist()
    else:
        keys_rows = [()] * n
        labels_rows = [()] * n
        sums = result.sums.tolist()
        counts = result.counts.tolist()

    value_cols = []
    for agg, _ in query.measures:
        if agg == "sum":
            value_cols.append(sums)
        elif agg == "count":
            value_cols.append(counts)
        else:  # average
            value_cols.append([s / c for s, c in zip(sums, counts)])
    values_rows = zip(*value_cols) if n else []

    rows = list(map(GridRow, keys_rows, labels_rows, values_rows))

    if query.sort is not None:
        column, direction = query.sort
        names = [f"{d}.{l}" for d, l in axes] + list(measure_cols)
        try:
            pos = names.index(column)
        except ValueError:
            raise QueryError(f"unknown sort column {column!r}", field="sort") from None
        n_axes = len(axes)
        if pos < n_axes:
            rows.sort(key=lambda r: r.labels[pos], reverse=(direction == "desc"))
        else:
            rows.sort(key=lambda r: r.values[pos - n_axes], reverse=(direction == "desc"))
    if query.limit is not None:
        rows = rows[: query.limit]

    return ResultGrid(axes=axes, measure_columns=measure_cols, rows=tuple(rows),
                      plan=plan, epoch=epoch)


def answer_from(plan, catalog, query: AggregateQuery, view: StoreView,
                elapsed_ms: float = 0.0) -> ResultGrid:
    """Answer a query from a rewrite plan's view: exactly equals the scan answer.

    Raises StaleViewError if the view changed epoch after planning; the caller
    replans (execute does this internally).
    """
    cuboid = catalog.cells_for(plan, view.epoch)
    result = _cells_execute(cuboid, plan.residual_spec, plan.residual_filter, view)
    info = PlanInfo(kind="mview", detail=plan.view, input_rows=plan.cells,
                    elapsed_ms=elapsed_ms)
    return _grid_from_cells(result, query, info, view.epoch)


def execute(engine, query: AggregateQuery, force: Optional[str] = None) -> ResultGrid:
    """Run a query; retries internally if a view refresh races the plan."""
    for _ in range(8):
        started = time.perf_counter()
        plan = plan_query(engine, query, force=force)
        view = engine.view()
        spec = query.spec(engine.schema)
        filt = query.scan_filter()
        try:
            if plan.kind == "mview":
                state = engine.mviews.state(plan.detail)
                if state is None or state.built_epoch != view.epoch:
                    raise StaleViewError(f"view {plan.detail!r} went stale")
                result = _cells_execute(state.data, spec, filt, view)
            elif plan.kind == "cuboid":
                source = None
                for cuboid in engine.cuboids().values():
                    if cuboid.spec.label(engine.schema) == plan.detail:
                        source = cuboid
                        break
                if source is None or source.epoch != view.epoch:
                    raise StaleViewError(f"cuboid {plan.detail} went stale")
                result = _cells_execute(source, spec, filt, view)
            else:
                result = build_cuboid(view, spec, filt)
        except StaleViewError:
            if force is not None:
                raise
            continue
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        info = PlanInfo(kind=plan.kind, detail=plan.detail,
                        input_rows=plan.estimated_rows, elapsed_ms=elapsed_ms)
        return _grid_from_cells(result, query, info, view.epoch)
    raise StaleViewError("query kept racing refreshes; giving up")


# ---------------------------------------------------------------------------
# Navigation


@dataclass(frozen=True)
class NavState:
    query: AggregateQuery
    history: tuple[AggregateQuery, ...] = ()

    def push(self, query: AggregateQuery) -> "NavState":
        return NavState(query=query, history=self.history + (self.query,))

    def back(self) -> "NavState":
        if not self.history:
            raise NavigationError("history is empty")
        return NavState(query=self.history[-1], history=self.history[:-1])


def roll_up(state: NavState, schema: StarSchema, dimension: str) -> NavState:
    """Move one level coarser; the coarsest level steps to ALL (ungrouped)."""
    dim = schema.dimension(dimension)
    current = state.query.level_of(dimension)
    if current is None:
        raise NavigationError(f"dimension {dimension!r} is already at ALL")
    ordinal = dim.level(current).ordinal
    if ordinal + 1 < len(dim.levels):
        coarser = dim.levels[ordinal + 1].name
        group_by = [
            (d, coarser) if d == dimension else (d, l) for d, l in state.query.group_by
        ]
    else:
        group_by = [(d, l) for d, l in state.query.group_by if d != dimension]
    return state.push(replace(state.query, group_by=tuple(group_by)))


def drill_down(state: NavState, schema: StarSchema, dimension: str,
               anchor=None, view: Optional[StoreView] = None) -> NavState:
    """Move one level finer; with an anchor, restrict to that member's children."""
    dim = schema.dimension(dimension)
    current = state.query.level_of(dimension)
    if current is None:
        new_level = dim.levels[-1].name  # ALL drills into the coarsest level
    else:
        ordinal = dim.level(current).ordinal
        if ordinal == 0:
            raise NavigationError(
                f"dimension {dimension!r} is already at its finest level {current!r}"
            )
        new_level = dim.levels[ordinal - 1].name

    query = state.query
    if anchor is not None:
        if current is None:
            raise NavigationError("anchored drill needs the dimension grouped below ALL")
        if view is not None:
            index = view.dim(dimension).level_index(current)
            if anchor not in index.by_key:
                raise NavigationError(
                    f"{anchor!r} is not a member of {dimension}.{current}"
                )
        query = _add_filter(query, FilterClause(dimension, current, frozenset([anchor])))

    if current is None:
        order = {name: i for i, name in enumerate(schema.dimension_names)}
        group_by = list(query.group_by) + [(dimension, new_level)]
        group_by.sort(key=lambda dl: order[dl[0]])
    else:
        group_by = [
            (d, new_level) if d == dimension else (d, l) for d, l in query.group_by
        ]
    return state.push(replace(query, group_by=tuple(group_by)))


def slice_member(state: NavState, schema: StarSchema, dimension: str, level: str,
                 member, view: Optional[StoreView] = None) -> NavState:
    """Add a single-member filter (intersecting any existing clause on that level)."""
    dim = schema.dimension(dimension)
    if not dim.has_level(level):
        raise NavigationError(f"dimension {dimension!r} has no level {level!r}")
    if view is not None:
        index = view.dim(dimension).level_index(level)
        if member not in index.by_key:
            raise NavigationError(f"unknown member {member!r} at {dimension}.{level}")
    return state.push(_add_filter(state.query, FilterClause(dimension, level, frozenset([member]))))


def dice(state: NavState, schema: StarSchema, clauses: Sequence[FilterClause],
         view: Optional[StoreView] = None) -> NavState:
    """Apply several filter clauses at once (a sub-cube restriction)."""
    query = state.query
    for clause in clauses:
        dim = schema.dimension(clause.dimension)
        if not dim.has_level(clause.level):
            raise NavigationError(
                f"dimension {clause.dimension!r} has no level {clause.level!r}"
            )
        if view is not None:
            index = view.dim(clause.dimension).level_index(clause.level)
            for member in clause.members:
                if member not in index.by_key:
                    raise NavigationError(
                        f"unknown member {member!r} at {clause.dimension}.{clause.level}"
                    )
        query = _add_filter(query, clause)
    return state.push(query)


def _add_filter(query: AggregateQuery, clause: FilterClause) -> AggregateQuery:
    out = []
    merged = False
    for existing in query.filters:
        if existing.dimension == clause.dimension and existing.level == clause.level:
            out.append(FilterClause(clause.dimension, clause.level,
                                    existing.members & clause.members))
            merged = True
        else:
            out.append(existing)
    if not merged:
        out.append(clause)
    return replace(query, filters=tuple(out))


def pivot(grid: ResultGrid, order: Sequence[int]) -> ResultGrid:
    """Permute presentation axes; cell values and row order are untouched."""
    if sorted(order) != list(range(len(grid.axes))):
        raise QueryError(
            f"axis permutation {list(order)} is not a permutation of "
            f"0..{len(grid.axes) - 1}"
        )
    if list(order) == list(range(len(grid.axes))):
        return grid
    axes = tuple(grid.axes[i] for i in order)
    rows = tuple(
        GridRow(
            keys=tuple(r.keys[i] for i in order),
            labels=tuple(r.labels[i] for i in order),
            values=r.values,
        )
        for r in grid.rows
    )
    return ResultGrid(axes=axes, measure_columns=grid.measure_columns, rows=rows,
                      plan=grid.plan, epoch=grid.epoch)
