"""Pipeline orchestration: extract every source, clean staging columns, resolve
cross-source conflicts, translate natural keys to surrogates and commit the
load atomically (dimensions before facts, one epoch bump, all-or-nothing).

Re-running an identical pipeline is a no-op: fact sources are fingerprinted
(config + content hash) and skipped once committed; dimension loads are
naturally idempotent through their natural keys.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import CleaningError, PipelineError, SchemaError
from ..schema import TIME_DIMENSION
from ..store import ColumnStore, day_attributes
from .cleaning import CleaningRule, coerce_numeric, correct, impute_mean, impute_regression, \
    smooth_bins, standardize
from .sources import FixedWidthLayout, SourceSpec, StagingBatch, extract

CONFIG_VERSION = 1
FACT_TARGET = "fact"


@dataclass(frozen=True)
class MViewConfig:
    name: str
    group_by: tuple[tuple[str, str], ...]
    measures: tuple[tuple[str, str], ...]
    rewrite_enabled: bool = True


@dataclass(frozen=True)
class PipelineOptions:
    unresolved_keys: str = "reject"  # or "unknown": route to the UNKNOWN member
    auto_refresh: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    schema_ref: str  # "nssf-default" or a schema document path
    sources: tuple[SourceSpec, ...]
    rules: tuple[CleaningRule, ...]
    options: PipelineOptions
    mviews: tuple[MViewConfig, ...]
    base_dir: Path


@dataclass
class SourceReport:
    id: str
    extracted: int = 0
    loaded: int = 0
    rejected: int = 0
    cleaned_cells: int = 0


@dataclass
class TargetReport:
    name: str
    inserted: int = 0
    deduplicated: int = 0
    rejected: int = 0


@dataclass
class RejectRecord:
    source: str
    line: int
    reason: str
    raw: str


@dataclass
class EtlReport:
    sources: dict[str, SourceReport] = dc_field(default_factory=dict)
    targets: dict[str, TargetReport] = dc_field(default_factory=dict)
    conflicts: list[str] = dc_field(default_factory=list)
    fallbacks: list[str] = dc_field(default_factory=list)
    rejects: list[RejectRecord] = dc_field(default_factory=list)
    committed_epoch: Optional[int] = None

    def source(self, source_id: str) -> SourceReport:
        return self.sources.setdefault(source_id, SourceReport(source_id))

    def target(self, name: str) -> TargetReport:
        return self.targets.setdefault(name, TargetReport(name))

    def reject(self, source_id: str, line: int, reason: str, raw: str) -> None:
        self.rejects.append(RejectRecord(source_id, line, reason, raw))
        self.source(source_id).rejected += 1

    def reconciles(self) -> bool:
        return all(s.extracted == s.loaded + s.rejected for s in self.sources.values())

    def to_doc(self) -> dict:
        return {
            "sources": {
                s.id: {
                    "extracted": s.extracted,
                    "loaded": s.loaded,
                    "rejected": s.rejected,
                    "cleaned_cells": s.cleaned_cells,
                }
                for s in self.sources.values()
            },
            "targets": {
                t.name: {
                    "inserted": t.inserted,
                    "deduplicated": t.deduplicated,
                    "rejected": t.rejected,
                }
                for t in self.targets.values()
            },
            "conflicts": list(self.conflicts),
            "fallbacks": list(self.fallbacks),
            "rejected_rows": len(self.rejects),
            "committed_epoch": self.committed_epoch,
        }

    def render(self) -> str:
        lines = ["source            extracted   loaded  rejected  cleaned"]
        for s in self.sources.values():
            lines.append(
                f"{s.id:<16} {s.extracted:>10} {s.loaded:>8} {s.rejected:>9} {s.cleaned_cells:>8}"
            )
        lines.append("")
        lines.append("target            inserted  deduplicated  rejected")
        for t in self.targets.values():
            lines.append(
                f"{t.name:<16} {t.inserted:>9} {t.deduplicated:>13} {t.rejected:>9}"
            )
        if self.conflicts:
            lines.append("")
            lines.append(f"conflicts resolved: {len(self.conflicts)}")
            lines.extend(f"  {c}" for c in self.conflicts)
        if self.fallbacks:
            lines.append("")
            lines.extend(f"fallback: {f}" for f in self.fallbacks)
        lines.append("")
        lines.append(
            f"committed epoch: {self.committed_epoch}"
            if self.committed_epoch is not None
            else "nothing committed"
        )
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Config document


def parse_pipeline_config(text: str, base_dir: Path) -> PipelineConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"not a well-formed pipeline document: {exc}") from exc
    version = doc.get("config_version")
    if version != CONFIG_VERSION:
        raise SchemaError(f"unsupported config_version {version!r}", field="config_version")

    sources = []
    for i, s_doc in enumerate(doc.get("source", [])):
        where = f"source[{i}]"
        for key in ("id", "kind", "path", "target"):
            if key not in s_doc:
                raise SchemaError(f"missing required key {key!r}", field=where)
        layout = None
        if "layout" in s_doc:
            l_doc = s_doc["layout"]
            try:
                layout = FixedWidthLayout(
                    record_length=l_doc["record_length"],
                    fields=tuple(
                        (f[0], int(f[1]), int(f[2]), f[3]) for f in l_doc["fields"]
                    ),
                )
            except (KeyError, IndexError, TypeError) as exc:
                raise SchemaError(f"bad layout: {exc}", field=where) from exc
        sources.append(
            SourceSpec(
                id=s_doc["id"],
                kind=s_doc["kind"],
                path=s_doc["path"],
                target=s_doc["target"],
                priority=int(s_doc.get("priority", 0)),
                layout=layout,
                delimiter=s_doc.get("delimiter"),
                header=bool(s_doc.get("header", True)),
            )
        )
    ids = [s.id for s in sources]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate source ids", field="source")

    rules = []
    for i, c_doc in enumerate(doc.get("clean", [])):
        where = f"clean[{i}]"
        for key in ("source", "column", "action"):
            if key not in c_doc:
                raise SchemaError(f"missing required key {key!r}", field=where)
        rules.append(
            CleaningRule(
                source=c_doc["source"],
                column=c_doc["column"],
                action=c_doc["action"],
                predictor=c_doc.get("predictor"),
                bins=int(c_doc.get("bins", 0)),
                mode=c_doc.get("mode", "means"),
                mapping=c_doc.get("map"),
            )
        )
    known_ids = set(ids)
    for rule in rules:
        if rule.source not in known_ids:
            raise SchemaError(f"cleaning rule references unknown source {rule.source!r}",
                              field="clean")

    o_doc = doc.get("options", {})
    unresolved = o_doc.get("unresolved_keys", "reject")
    if unresolved not in ("reject", "unknown"):
        raise SchemaError(f"unresolved_keys must be reject or unknown, got {unresolved!r}",
                          field="options")
    options = PipelineOptions(
        unresolved_keys=unresolved,
        auto_refresh=bool(o_doc.get("auto_refresh", True)),
    )

    mviews = []
    for i, v_doc in enumerate(doc.get("mview", [])):
        where = f"mview[{i}]"
        if "name" not in v_doc or "group_by" not in v_doc:
            raise SchemaError("mview needs name and group_by", field=where)
        measures = tuple(
            (m[0], m[1]) for m in v_doc.get("measures", [["sum", "montant"]])
        )
        mviews.append(
            MViewConfig(
                name=v_doc["name"],
                group_by=tuple(v_doc["group_by"].items()),
                measures=measures,
                rewrite_enabled=bool(v_doc.get("rewrite", True)),
            )
        )

    return PipelineConfig(
        schema_ref=doc.get("schema", "nssf-default"),
        sources=tuple(sources),
        rules=tuple(rules),
        options=options,
        mviews=tuple(mviews),
        base_dir=base_dir,
    )


# ---------------------------------------------------------------------------
# Cleaning application


def apply_rules(batch: StagingBatch, rules: list[CleaningRule], report: EtlReport) -> None:
    src = report.source(batch.source_id)
    src.cleaned_cells += batch.degraded_cells
    for rule in rules:
        if rule.column not in batch.fields:
            raise PipelineError(
                f"cleaning rule on {batch.source_id!r}: no column {rule.column!r}",
                report=report,
            )
        column = [row[rule.column] for row in batch.rows]
        if not column:
            continue
        if rule.action == "correct":
            new_column, changed = correct(column, rule.mapping)
        else:
            numeric, degraded = coerce_numeric(column)
            src.cleaned_cells += degraded
            if rule.action == "impute_mean":
                new_column = impute_mean(numeric)
            elif rule.action == "impute_regression":
                if rule.predictor not in batch.fields:
                    raise PipelineError(
                        f"cleaning rule on {batch.source_id!r}: no predictor column "
                        f"{rule.predictor!r}",
                        report=report,
                    )
                predictor, p_degraded = coerce_numeric(
                    [row[rule.predictor] for row in batch.rows]
                )
                src.cleaned_cells += p_degraded
                new_column, fell_back = impute_regression(numeric, predictor)
                if fell_back:
                    report.fallbacks.append(
                        f"{batch.source_id}.{rule.column}: zero predictor variance, "
                        f"fell back to mean imputation"
                    )
            elif rule.action == "smooth_bins":
                new_column = smooth_bins(numeric, rule.bins, rule.mode)
            elif rule.action == "standardize":
                new_column = standardize(numeric)
            else:
                raise PipelineError(f"unknown action {rule.action!r}", report=report)
            changed = sum(
                1 for old, new in zip(numeric, new_column) if old is None or old != new
            )
        for row, value in zip(batch.rows, new_column):
            row[rule.column] = value
        src.cleaned_cells += changed


# ---------------------------------------------------------------------------
# Conflict resolution


def _normalize_member_row(dim, row: dict) -> tuple[Optional[dict], Optional[str]]:
    """Project a staging row onto the dimension attributes with declared kinds.

    Returns (row, None) or (None, reject reason).
    """
    out = {}
    for attr, kind in dim.member_attributes:
        if attr not in row:
            return None, f"missing attribute {attr!r}"
        value = row[attr]
        if value is None:
            return None, f"missing attribute {attr!r}"
        if kind == "integer":
            try:
                value = int(value)
            except (TypeError, ValueError):
                return None, f"bad integer for attribute {attr!r}: {value!r}"
        else:
            value = str(value)
        out[attr] = value
    return out, None


def resolve_conflicts(batches: list[StagingBatch], dim, report: EtlReport) -> list[dict]:
    """Merge staging batches for one dimension into one row per natural key.

    Within a source the first occurrence of a key wins and later duplicates are
    rejected. Across sources the highest-priority source supplies the row; a
    losing value that disagrees is logged with both values.
    """
    key_attr = dim.natural_key
    # (priority, order) per natural key; order = first appearance for stable output
    merged: dict = {}
    appearance: list = []
    for batch_no, batch in enumerate(batches):
        src = report.source(batch.source_id)
        seen: set = set()
        for row, (source_id, line) in zip(batch.rows, batch.provenance):
            normalized, reason = _normalize_member_row(dim, row)
            if normalized is None:
                report.reject(source_id, line, reason, _render_row(row))
                continue
            key = normalized[key_attr]
            if key in seen:
                report.reject(
                    source_id, line, f"duplicate natural key {key!r}", _render_row(row)
                )
                continue
            seen.add(key)
            src.loaded += 1
            candidate = (batch.priority, -batch_no, normalized, batch.source_id)
            if key not in merged:
                merged[key] = candidate
                appearance.append(key)
            else:
                winner = max(merged[key], candidate, key=lambda c: (c[0], c[1]))
                loser = candidate if winner is merged[key] else merged[key]
                for attr in dim.attribute_names:
                    if winner[2][attr] != loser[2][attr]:
                        report.conflicts.append(
                            f"{dim.name} {key!r}.{attr}: kept {winner[2][attr]!r} "
                            f"(source {winner[3]}, priority {winner[0]}) over "
                            f"{loser[2][attr]!r} (source {loser[3]}, priority {loser[0]})"
                        )
                merged[key] = winner
    return [merged[key][2] for key in appearance]


def _render_row(row: dict) -> str:
    return ";".join(f"{k}={'' if v is None else v}" for k, v in row.items())


# ---------------------------------------------------------------------------
# Fact translation and the run itself


def _source_fingerprint(source: SourceSpec, base_dir: Path) -> str:
    path = Path(source.path)
    if not path.is_absolute():
        path = base_dir / path
    config_doc = json.dumps(
        {
            "id": source.id,
            "kind": source.kind,
            "target": source.target,
            "layout": None if source.layout is None else [
                source.layout.record_length, list(map(list, source.layout.fields))
            ],
            "delimiter": source.effective_delimiter,
        },
        sort_keys=True,
    )
    h = hashlib.sha256()
    h.update(config_doc.encode("utf-8"))
    h.update(path.read_bytes())
    return h.hexdigest()


def run_pipeline(config: PipelineConfig, store: ColumnStore) -> EtlReport:
    """Execute the whole pipeline against a store; atomic commit, full report.

    Any fatal source error raises PipelineError carrying the partial report and
    leaves the store untouched. The store's writer role is held for the whole
    run, so staged surrogate assignments cannot race another writer.
    """
    with store.exclusive_writer():
        return _run_pipeline_locked(config, store)


def _run_pipeline_locked(config: PipelineConfig, store: ColumnStore) -> EtlReport:
    schema = store.schema
    report = EtlReport()

    for source in config.sources:
        if source.target != FACT_TARGET and not schema.has_dimension(source.target):
            raise PipelineError(
                f"source {source.id!r} targets unknown dimension {source.target!r}",
                report=report,
            )

    # extract + clean everything before touching the store
    batches: list[StagingBatch] = []
    for source in config.sources:
        try:
            batch = extract(source, config.base_dir)
        except Exception as exc:
            raise PipelineError(str(exc), report=report) from exc
        src = report.source(source.id)
        src.extracted = batch.extracted + len(batch.rejects)
        for line, reason, raw in batch.rejects:
            report.reject(source.id, line, reason, raw)
        rules = [r for r in config.rules if r.source == source.id]
        try:
            apply_rules(batch, rules, report)
        except CleaningError as exc:
            raise PipelineError(
                f"cleaning failed on source {source.id!r}: {exc}", report=report
            ) from exc
        batches.append(batch)

    # dimensions first: resolve conflicts per target dimension
    dim_new_rows: dict[str, list[dict]] = {}
    staged_keys: dict[str, dict] = {}
    for dim in schema.dimensions:
        dim_batches = [b for b in batches if b.target == dim.name]
        if not dim_batches:
            continue
        for batch in dim_batches:
            missing = set(dim.attribute_names) - set(batch.fields)
            if missing:
                raise PipelineError(
                    f"source {batch.source_id!r} lacks column(s) "
                    f"{', '.join(sorted(missing))} required by dimension {dim.name!r}",
                    report=report,
                )
        rows = resolve_conflicts(dim_batches, dim, report)
        table = store.dim(dim.name)
        fresh = [r for r in rows if table.surrogate(r[dim.natural_key]) is None]
        # drop within-run duplicates already handled by resolve_conflicts
        dim_new_rows[dim.name] = fresh
        t = report.target(dim.name)
        t.inserted = len(fresh)
        t.deduplicated = len(rows) - len(fresh)
        staged_keys[dim.name] = {
            r[dim.natural_key]: table.member_count + i + 1 for i, r in enumerate(fresh)
        }

    # facts: skip batches already committed (fingerprint), translate the rest
    fact_sources = [s for s in config.sources if s.target == FACT_TARGET]
    fact_report = report.target(FACT_TARGET) if fact_sources else None
    fact_columns: dict[str, list[int]] = {d: [] for d in schema.dimension_names}
    fact_amounts: list[int] = []
    fingerprints: list[str] = []
    committed = set(store.meta.batch_fingerprints)
    measure = schema.fact.measures[0].name
    time_days: dict[str, dict] = {}

    for source in fact_sources:
        batch = next(b for b in batches if b.source_id == source.id)
        src = report.source(source.id)
        fingerprint = _source_fingerprint(source, config.base_dir)
        if fingerprint in committed:
            fact_report.deduplicated += batch.extracted
            src.loaded += batch.extracted
            continue
        fingerprints.append(fingerprint)
        needed = {col for _, col in schema.fact.dimension_keys} | {measure}
        missing_cols = needed - set(batch.fields)
        if missing_cols:
            raise PipelineError(
                f"fact source {source.id!r} lacks column(s) {', '.join(sorted(missing_cols))}",
                report=report,
            )
        for row, (source_id, line) in zip(batch.rows, batch.provenance):
            surrogates = {}
            reason = None
            for dim_name, col in schema.fact.dimension_keys:
                dim = schema.dimension(dim_name)
                raw_value = row.get(col)
                if raw_value is None:
                    reason = f"missing key {dim_name}"
                    break
                if dim_name == TIME_DIMENSION:
                    day = str(raw_value)
                    try:
                        attrs = day_attributes(day)
                    except ValueError:
                        reason = f"unresolved key {dim_name}"
                        break
                    table = store.dim(TIME_DIMENSION)
                    surrogate = table.surrogate(day)
                    if surrogate is None:
                        staged = staged_keys.setdefault(TIME_DIMENSION, {})
                        if day not in staged:
                            staged[day] = table.member_count + len(staged) + 1
                            time_days[day] = attrs
                        surrogate = staged[day]
                    surrogates[dim_name] = surrogate
                    continue
                key_kind = dim.attribute_kind(dim.natural_key)
                try:
                    natural = int(raw_value) if key_kind == "integer" else str(raw_value).strip()
                except (TypeError, ValueError):
                    reason = f"unresolved key {dim_name}"
                    break
                surrogate = store.dim(dim_name).surrogate(natural)
                if surrogate is None:
                    surrogate = staged_keys.get(dim_name, {}).get(natural)
                if surrogate is None:
                    if config.options.unresolved_keys == "unknown":
                        surrogate = 0
                    else:
                        reason = f"unresolved key {dim_name}"
                        break
                surrogates[dim_name] = surrogate
            if reason is None:
                amount_raw = row.get(measure)
                if amount_raw is None:
                    reason = f"missing measure {measure}"
                elif isinstance(amount_raw, int):
                    amount = amount_raw
                else:
                    # string amounts parse exactly; imputed floats round to millimes
                    try:
                        amount = int(str(amount_raw).strip())
                    except (TypeError, ValueError):
                        try:
                            amount = int(round(float(amount_raw)))
                        except (TypeError, ValueError):
                            reason = f"bad measure {measure}: {amount_raw!r}"
            if reason is not None:
                report.reject(source_id, line, reason, _render_row(row))
                fact_report.rejected += 1
                continue
            for d, s in surrogates.items():
                fact_columns[d].append(s)
            fact_amounts.append(amount)
            src.loaded += 1

    if time_days:
        dim_new_rows.setdefault(TIME_DIMENSION, [])
        dim_new_rows[TIME_DIMENSION].extend(time_days.values())
        t = report.target(TIME_DIMENSION)
        t.inserted += len(time_days)

    if fact_report is not None:
        fact_report.inserted = len(fact_amounts)

    members_added, facts_added = store.apply_load(
        dim_new_rows,
        {d: np.asarray(v, dtype=np.int32) for d, v in fact_columns.items()},
        np.asarray(fact_amounts, dtype=np.int64),
        fingerprints,
    )
    if members_added or facts_added:
        report.committed_epoch = store.epoch
    return report
