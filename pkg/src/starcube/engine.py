"""Warehouse facade: one object owning the schema, column store, materialized
views and built cuboids, plus directory persistence (schema document, snapshot
file, reject log) and commit hooks (view invalidation / auto refresh).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional, Sequence

from . import snapshot as snap
from .cube import Cuboid, GroupBySpec, build_cube, estimate_cells, lattice
from .errors import PipelineError, StoreError
from .etl.pipeline import EtlReport, PipelineConfig, run_pipeline
from .mview import MViewCatalog, MViewDef
from .query import AggregateQuery, ResultGrid, execute
from .schema import StarSchema, load_schema, nssf_default_schema, serialize_schema
from .store import ColumnStore, StoreView

SCHEMA_FILE = "schema.toml"
SNAPSHOT_FILE = "warehouse.snap"
REJECT_LOG = "rejects.log"

DEFAULT_CELL_BUDGET = 8_000_000


class Engine:
    def __init__(self, schema: StarSchema, directory: Optional[Path] = None):
        self.schema = schema
        self.directory = Path(directory) if directory is not None else None
        self.store = ColumnStore(schema)
        self.mviews = MViewCatalog(schema)
        self.cubes: dict[GroupBySpec, Cuboid] = {}
        self.auto_refresh = True
        self.cell_budget = DEFAULT_CELL_BUDGET
        self.store.on_commit(self._on_commit)

    # -- lifecycle ------------------------------------------------------------

    @classmethod
    def create(cls, directory, schema: Optional[StarSchema] = None) -> "Engine":
        """Initialize a warehouse directory with a schema document and empty snapshot."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        schema = schema or nssf_default_schema()
        (directory / SCHEMA_FILE).write_text(serialize_schema(schema), encoding="utf-8")
        engine = cls(schema, directory)
        engine.save()
        return engine

    @classmethod
    def open(cls, directory) -> "Engine":
        directory = Path(directory)
        schema_path = directory / SCHEMA_FILE
        if not schema_path.exists():
            raise StoreError(
                f"{directory} is not a warehouse directory (no {SCHEMA_FILE}); "
                f"run init or point --warehouse at one"
            )
        schema = load_schema(schema_path.read_text(encoding="utf-8"))
        engine = cls(schema, directory)
        snapshot_path = directory / SNAPSHOT_FILE
        if snapshot_path.exists():
            engine._adopt(*snap.load_snapshot(snapshot_path, schema))
        return engine

    @classmethod
    def open_or_create(cls, directory, schema: Optional[StarSchema] = None) -> "Engine":
        directory = Path(directory)
        if (directory / SCHEMA_FILE).exists():
            return cls.open(directory)
        return cls.create(directory, schema)

    def _adopt(self, store: ColumnStore, mviews: MViewCatalog,
               cubes: dict[GroupBySpec, Cuboid]) -> None:
        self.store = store
        self.mviews = mviews
        self.cubes = cubes
        self.store.on_commit(self._on_commit)

    def save(self) -> None:
        if self.directory is None:
            return
        snap.save_snapshot(self.directory / SNAPSHOT_FILE, self.store, self.mviews, self.cubes)

    # -- commit hook ------------------------------------------------------------

    def _on_commit(self, epoch: int) -> None:
        self.cubes = {s: c for s, c in self.cubes.items() if c.epoch == epoch}
        if self.auto_refresh:
            self.mviews.refresh_stale(self.view())

    # -- reads ------------------------------------------------------------------

    def view(self) -> StoreView:
        return self.store.view()

    def cuboids(self) -> dict[GroupBySpec, Cuboid]:
        return self.cubes

    def execute(self, query: AggregateQuery, force: Optional[str] = None) -> ResultGrid:
        return execute(self, query, force=force)

    # -- ETL ----------------------------------------------------------------------

    def run_etl(self, config: PipelineConfig) -> EtlReport:
        """Register configured views, run the pipeline, persist log + snapshot."""
        self.auto_refresh = config.options.auto_refresh
        for view_conf in config.mviews:
            definition = MViewDef(
                name=view_conf.name,
                spec=GroupBySpec.from_levels(self.schema, dict(view_conf.group_by)),
                measures=view_conf.measures,
                rewrite_enabled=view_conf.rewrite_enabled,
            )
            if view_conf.name in self.mviews.names():
                if self.mviews.definition(view_conf.name) != definition:
                    self.mviews.redefine(definition)
            else:
                self.mviews.define(definition)
        try:
            report = run_pipeline(config, self.store)
        except PipelineError as exc:
            if exc.report is not None:
                self._write_rejects(exc.report)
            raise
        self._write_rejects(report)
        self.save()
        return report

    def _write_rejects(self, report: EtlReport) -> None:
        if self.directory is None or not report.rejects:
            return
        path = self.directory / REJECT_LOG
        new_file = not path.exists()
        with path.open("a", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(["source", "line", "reason", "raw"])
            for r in report.rejects:
                writer.writerow([r.source, r.line, r.reason, r.raw])

    # -- cube / view management ------------------------------------------------------

    def build_cubes(self, specs: Sequence[GroupBySpec] | str) -> int:
        built = build_cube(self.view(), specs, cell_budget=self.cell_budget)
        self.cubes.update(built)
        self.save()
        return len(built)

    def refresh_views(self, names: Optional[Sequence[str]] = None,
                      only_stale: bool = True) -> int:
        view = self.view()
        refreshed = 0
        for name in (names if names is not None else self.mviews.names()):
            if only_stale and not self.mviews.is_stale(name, view.epoch):
                continue
            self.mviews.refresh(name, view)
            refreshed += 1
        if refreshed:
            self.save()
        return refreshed

    # -- catalog / members (shared by CLI and HTTP API) ---------------------------------

    def catalog_doc(self) -> dict:
        view = self.view()
        return {
            "fact": {
                "name": self.schema.fact.name,
                "measures": [
                    {"name": m.name, "aggregator": m.aggregator, "unit": m.unit}
                    for m in self.schema.fact.measures
                ],
                "rows": view.facts.row_count,
            },
            "dimensions": [
                {
                    "name": d.name,
                    "levels": [
                        {"name": lv.name, "ordinal": lv.ordinal} for lv in d.levels
                    ],
                    "members": view.dim(d.name).member_count,
                }
                for d in self.schema.dimensions
            ],
            "mviews": self.mviews.describe(view.epoch),
            "cuboids": [
                {
                    "spec": spec.label(self.schema),
                    "cells": cuboid.n_cells,
                    "epoch": cuboid.epoch,
                }
                for spec, cuboid in self.cubes.items()
            ],
            "epoch": view.epoch,
        }

    def members_page(self, dimension: str, level: str, parent=None,
                     page: int = 1, page_size: int = 200) -> dict:
        dim = self.schema.dimension(dimension)  # KeyError -> caller maps to 404
        if not dim.has_level(level):
            raise KeyError(f"dimension {dimension!r} has no level {level!r}")
        view = self.view()
        table = view.dim(dimension)
        index = table.level_index(level)
        ids = list(range(1, index.size))
        if parent is not None:
            ordinal = dim.level(level).ordinal
            if ordinal + 1 >= len(dim.levels):
                raise KeyError(f"level {level!r} has no parent level")
            parent_level = dim.levels[ordinal + 1].name
            parent_index = table.level_index(parent_level)
            parent_id = parent_index.by_key.get(parent)
            if parent_id is None:
                raise KeyError(f"unknown parent member {parent!r} at {parent_level!r}")
            up = table.rollup_map(level, parent_level)
            ids = [i for i in ids if int(up[i]) == parent_id]
        ids.sort(key=lambda i: str(index.keys[i]))
        total = len(ids)
        start = (page - 1) * page_size
        page_ids = ids[start:start + page_size]
        return {
            "dimension": dimension,
            "level": level,
            "parent": parent,
            "page": page,
            "page_size": page_size,
            "total": total,
            "members": [
                {"key": index.keys[i], "label": index.labels[i]} for i in page_ids
            ],
        }

    def lattice_size(self) -> int:
        return len(lattice(self.schema).nodes)

    def estimate_full_cube(self) -> int:
        view = self.view()
        return sum(estimate_cells(view, s) for s in lattice(self.schema).nodes)
