"""Group-by lattice enumeration and cuboid materialization.

A GroupBySpec picks one granularity per dimension: a level ordinal, or ALL
(the implicit coarsest level collapsing the dimension). The lattice orders
specs by coarseness; cuboids are built either directly from fact columns or by
re-aggregating a finer cuboid along the hierarchy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import CubeBudgetError, CubeError
from .schema import StarSchema
from .store import LevelIndex, ScanFilter, StoreView

ALL = None  # level choice collapsing a dimension


@dataclass(frozen=True)
class GroupBySpec:
    """One level choice per schema dimension, in schema order (None = ALL)."""

    choices: tuple[Optional[int], ...]

    @staticmethod
    def from_levels(schema: StarSchema, levels: dict[str, str]) -> "GroupBySpec":
        """Build from {dimension: level name}; absent dimensions collapse to ALL."""
        choices: list[Optional[int]] = []
        for dim in schema.dimensions:
            if dim.name in levels:
                choices.append(dim.level(levels[dim.name]).ordinal)
            else:
                choices.append(ALL)
        unknown = set(levels) - set(schema.dimension_names)
        if unknown:
            raise CubeError(f"unknown dimension(s) in grouping: {', '.join(sorted(unknown))}")
        return GroupBySpec(tuple(choices))

    def validate(self, schema: StarSchema) -> None:
        if len(self.choices) != len(schema.dimensions):
            raise CubeError(
                f"spec has {len(self.choices)} choices for {len(schema.dimensions)} dimensions"
            )
        for dim, choice in zip(schema.dimensions, self.choices):
            if choice is not None and not 0 <= choice < len(dim.levels):
                raise CubeError(f"dimension {dim.name!r} has no level ordinal {choice}")

    def grouped(self, schema: StarSchema) -> list[tuple[str, str]]:
        """Non-ALL dimensions as (dimension, level name), schema order."""
        out = []
        for dim, choice in zip(schema.dimensions, self.choices):
            if choice is not None:
                out.append((dim.name, dim.levels[choice].name))
        return out

    def level_of(self, schema: StarSchema, dimension: str) -> Optional[str]:
        choice = self.choices[schema.dimension_index(dimension)]
        if choice is None:
            return None
        return schema.dimension(dimension).levels[choice].name

    def is_coarser_or_equal(self, other: "GroupBySpec") -> bool:
        """True if every choice is equal-or-coarser than ``other``'s (ALL coarsest)."""
        for mine, theirs in zip(self.choices, other.choices):
            if mine is None:
                continue
            if theirs is None or mine < theirs:
                return False
        return True

    def label(self, schema: StarSchema) -> str:
        parts = []
        for dim, choice in zip(schema.dimensions, self.choices):
            level = "ALL" if choice is None else dim.levels[choice].name
            parts.append(f"{dim.name}:{level}")
        return "|".join(parts)

    @staticmethod
    def parse(schema: StarSchema, text: str) -> "GroupBySpec":
        """Inverse of label(); omitted dimensions default to ALL."""
        levels: dict[str, str] = {}
        text = text.strip()
        if text in ("", "ALL"):
            return GroupBySpec.from_levels(schema, {})
        for part in text.split("|"):
            if ":" not in part:
                raise CubeError(f"bad spec component {part!r} (want dimension:level)")
            dim, level = part.split(":", 1)
            if level != "ALL":
                levels[dim.strip()] = level.strip()
        return GroupBySpec.from_levels(schema, levels)


@dataclass(frozen=True)
class CubeLattice:
    """All specs of a schema under the coarseness partial order."""

    schema: StarSchema
    nodes: tuple[GroupBySpec, ...]

    def parents(self, spec: GroupBySpec) -> list[GroupBySpec]:
        """One-step coarsenings (top level steps to ALL)."""
        out = []
        for i, (dim, choice) in enumerate(zip(self.schema.dimensions, spec.choices)):
            if choice is None:
                continue
            coarser = choice + 1 if choice + 1 < len(dim.levels) else ALL
            out.append(GroupBySpec(spec.choices[:i] + (coarser,) + spec.choices[i + 1:]))
        return out

    def children(self, spec: GroupBySpec) -> list[GroupBySpec]:
        out = []
        for i, (dim, choice) in enumerate(zip(self.schema.dimensions, spec.choices)):
            n = len(dim.levels)
            finer = n - 1 if choice is None else choice - 1
            if finer >= 0:
                out.append(GroupBySpec(spec.choices[:i] + (finer,) + spec.choices[i + 1:]))
        return out

    def edges(self):
        for node in self.nodes:
            for parent in self.parents(node):
                yield node, parent

    @property
    def finest(self) -> GroupBySpec:
        return GroupBySpec(tuple(0 for _ in self.schema.dimensions))

    @property
    def coarsest(self) -> GroupBySpec:
        return GroupBySpec(tuple(ALL for _ in self.schema.dimensions))


def lattice(schema: StarSchema) -> CubeLattice:
    """Enumerate every level-choice combination: prod(level count + 1) nodes."""
    axes = [list(range(len(d.levels))) + [ALL] for d in schema.dimensions]
    nodes = tuple(GroupBySpec(tuple(combo)) for combo in itertools.product(*axes))
    return CubeLattice(schema=schema, nodes=nodes)


@dataclass
class Cuboid:
    """One materialized group-by: coordinates are level-member ids (see LevelIndex)."""

    spec: GroupBySpec
    epoch: int
    dims: tuple[str, ...]  # grouped dimensions, schema order
    levels: tuple[str, ...]  # level name per grouped dimension
    coords: tuple[np.ndarray, ...]  # int32 id column per grouped dimension
    sums: np.ndarray  # int64
    counts: np.ndarray  # int64
    indexes: tuple[LevelIndex, ...] = field(repr=False, default=())

    @property
    def n_cells(self) -> int:
        return int(self.sums.shape[0])

    @property
    def grand_total(self) -> int:
        return int(self.sums.sum())

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())

    def cells(self) -> dict[tuple[int, ...], tuple[int, int]]:
        """Coordinate tuple -> (sum, count); empty tuple keys the all-ALL cuboid."""
        out = {}
        for i in range(self.n_cells):
            coord = tuple(int(c[i]) for c in self.coords)
            out[coord] = (int(self.sums[i]), int(self.counts[i]))
        return out

    def cells_by_key(self) -> dict[tuple, tuple[int, int]]:
        """Like cells() but coordinates are level key values (readable in tests)."""
        out = {}
        for i in range(self.n_cells):
            coord = tuple(idx.keys[int(c[i])] for idx, c in zip(self.indexes, self.coords))
            out[coord] = (int(self.sums[i]), int(self.counts[i]))
        return out


def _aggregate(code_columns: list[np.ndarray], radices: list[int],
               sums_in: np.ndarray, counts_in: Optional[np.ndarray]):
    """Group rows/cells by packed codes; counts_in None means count rows."""
    if not code_columns:
        if sums_in.shape[0] == 0:
            empty32 = []
            return empty32, np.empty(0, np.int64), np.empty(0, np.int64)
        total = np.asarray([sums_in.sum()], dtype=np.int64)
        count = np.asarray(
            [sums_in.shape[0] if counts_in is None else counts_in.sum()], dtype=np.int64
        )
        return [], total, count
    keys, bound = kernels.pack_codes(code_columns, radices)
    if counts_in is None:
        uniq, sums, counts = kernels.sum_by_key(keys, sums_in, bound)
    else:
        uniq, sums, counts = kernels.sum2_by_key(keys, sums_in, counts_in, bound)
    return kernels.unpack_codes(uniq, radices), sums, counts


def build_cuboid(view: StoreView, spec: GroupBySpec,
                 filt: Optional[ScanFilter] = None) -> Cuboid:
    """Aggregate fact columns at the spec's levels (cells exist iff count > 0)."""
    spec.validate(view.schema)
    grouped = spec.grouped(view.schema)
    mask = view.filter_mask(filt)

    code_columns: list[np.ndarray] = []
    radices: list[int] = []
    indexes: list[LevelIndex] = []
    for dim_name, level_name in grouped:
        index = view.dim(dim_name).level_index(level_name)
        fk = view.facts.keys[dim_name]
        if mask is not None:
            fk = fk[mask]
        code_columns.append(index.codes[fk])
        radices.append(index.size)
        indexes.append(index)
    amounts = view.facts.amounts if mask is None else view.facts.amounts[mask]

    coords, sums, counts = _aggregate(code_columns, radices, amounts, None)
    return Cuboid(
        spec=spec,
        epoch=view.epoch,
        dims=tuple(d for d, _ in grouped),
        levels=tuple(l for _, l in grouped),
        coords=tuple(coords),
        sums=sums,
        counts=counts,
        indexes=tuple(indexes),
    )


def rollup_from(finer: Cuboid, coarser_spec: GroupBySpec, view: StoreView) -> Cuboid:
    """Re-aggregate a finer cuboid's cells up the hierarchy; equals a direct build."""
    coarser_spec.validate(view.schema)
    if finer.epoch != view.epoch:
        raise CubeError(
            f"cuboid epoch {finer.epoch} does not match store epoch {view.epoch}"
        )
    if not coarser_spec.is_coarser_or_equal(finer.spec):
        raise CubeError(
            f"spec {coarser_spec.label(view.schema)} is not a coarsening of "
            f"{finer.spec.label(view.schema)}"
        )
    grouped = coarser_spec.grouped(view.schema)
    fine_pos = {d: i for i, d in enumerate(finer.dims)}

    code_columns: list[np.ndarray] = []
    radices: list[int] = []
    indexes: list[LevelIndex] = []
    for dim_name, level_name in grouped:
        table = view.dim(dim_name)
        index = table.level_index(level_name)
        fine_level = finer.levels[fine_pos[dim_name]]
        fine_codes = finer.coords[fine_pos[dim_name]]
        if fine_level == level_name:
            code_columns.append(fine_codes)
        else:
            code_columns.append(table.rollup_map(fine_level, level_name)[fine_codes])
        radices.append(index.size)
        indexes.append(index)

    coords, sums, counts = _aggregate(code_columns, radices, finer.sums, finer.counts)
    return Cuboid(
        spec=coarser_spec,
        epoch=finer.epoch,
        dims=tuple(d for d, _ in grouped),
        levels=tuple(l for _, l in grouped),
        coords=tuple(coords),
        sums=sums,
        counts=counts,
        indexes=tuple(indexes),
    )


def estimate_cells(view: StoreView, spec: GroupBySpec) -> int:
    """Upper bound on cell count: member-count product capped by fact rows."""
    product = 1
    for dim_name, level_name in spec.grouped(view.schema):
        product *= max(view.dim(dim_name).level_index(level_name).size - 1, 1)
        if product >= view.facts.row_count:
            return max(view.facts.row_count, 1)
    return max(min(product, max(view.facts.row_count, 1)), 1)


def build_cube(view: StoreView, specs: Sequence[GroupBySpec] | str = "full",
               cell_budget: int = 8_000_000) -> dict[GroupBySpec, Cuboid]:
    """Build the requested cuboids, derive coarser ones from the smallest finer one.

    ``specs="full"`` materializes the whole lattice, allowed only when the
    estimated total cell count stays under ``cell_budget``.
    """
    lat = lattice(view.schema)
    if isinstance(specs, str):
        if specs != "full":
            raise CubeError(f"unknown cube request {specs!r}")
        wanted = list(lat.nodes)
        estimate = sum(estimate_cells(view, s) for s in wanted)
        if estimate > cell_budget:
            raise CubeBudgetError(
                f"full cube estimate {estimate} cells exceeds budget {cell_budget}; "
                f"request explicit specs instead"
            )
    else:
        wanted = list(specs)
        for s in wanted:
            s.validate(view.schema)

    def rank(spec: GroupBySpec) -> int:
        # steps of coarsening from the finest node; ALL counts as the full ladder
        total = 0
        for dim, choice in zip(view.schema.dimensions, spec.choices):
            total += len(dim.levels) if choice is None else choice
        return total

    catalog: dict[GroupBySpec, Cuboid] = {}
    for spec in sorted(set(wanted), key=lambda s: (rank(s), s.label(view.schema))):
        sources = [c for c in catalog.values() if spec.is_coarser_or_equal(c.spec)]
        if sources:
            best = min(sources, key=lambda c: c.n_cells)
            catalog[spec] = rollup_from(best, spec, view)
        else:
            catalog[spec] = build_cuboid(view, spec)
    # hand cuboids back in request order
    return {spec: catalog[spec] for spec in wanted}
