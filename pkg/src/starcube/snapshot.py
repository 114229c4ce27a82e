"""Single-file warehouse snapshot: little-endian fixed header, length-prefixed
sections each carrying a CRC32, and a whole-file trailing CRC32.

Sections hold the schema document, meta (epoch + batch fingerprints), one JSON
section per dimension table, raw fact columns, and optionally materialized-view
definitions/cells and built cuboids. Serialization is fully deterministic, so
save -> load -> save reproduces identical bytes.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from .cube import Cuboid, GroupBySpec
from .errors import SnapshotError
from .mview import MViewCatalog, MViewDef, MViewState
from .schema import StarSchema, load_schema, serialize_schema
from .store import ColumnStore, StoreView

MAGIC = b"SCWHSNP1"
FORMAT_VERSION = 1


def _json_bytes(doc) -> bytes:
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _pack_section(name: str, payload: bytes) -> bytes:
    name_b = name.encode("ascii")
    return (
        struct.pack("<H", len(name_b))
        + name_b
        + struct.pack("<QI", len(payload), zlib.crc32(payload))
        + payload
    )


def _cells_payload(cuboid: Cuboid) -> bytes:
    parts = [struct.pack("<IQ", len(cuboid.coords), cuboid.n_cells)]
    for codes in cuboid.coords:
        parts.append(codes.astype("<i4").tobytes())
    parts.append(cuboid.sums.astype("<i8").tobytes())
    parts.append(cuboid.counts.astype("<i8").tobytes())
    return b"".join(parts)


def _cells_restore(payload: bytes, spec: GroupBySpec, epoch: int, view: StoreView) -> Cuboid:
    n_dims, n_cells = struct.unpack_from("<IQ", payload, 0)
    offset = 12
    coords = []
    for _ in range(n_dims):
        arr = np.frombuffer(payload, dtype="<i4", count=n_cells, offset=offset).astype(np.int32)
        coords.append(arr)
        offset += 4 * n_cells
    sums = np.frombuffer(payload, dtype="<i8", count=n_cells, offset=offset).astype(np.int64)
    offset += 8 * n_cells
    counts = np.frombuffer(payload, dtype="<i8", count=n_cells, offset=offset).astype(np.int64)

    grouped = spec.grouped(view.schema)
    indexes = tuple(view.dim(d).level_index(l) for d, l in grouped)
    return Cuboid(
        spec=spec,
        epoch=epoch,
        dims=tuple(d for d, _ in grouped),
        levels=tuple(l for _, l in grouped),
        coords=tuple(coords),
        sums=sums,
        counts=counts,
        indexes=indexes,
    )


def serialize(store: ColumnStore, mviews: Optional[MViewCatalog] = None,
              cubes: Optional[dict[GroupBySpec, Cuboid]] = None) -> bytes:
    schema = store.schema
    sections: list[tuple[str, bytes]] = []

    sections.append(("schema", serialize_schema(schema).encode("utf-8")))
    sections.append(
        ("meta", _json_bytes({
            "epoch": store.epoch,
            "fingerprints": list(store.meta.batch_fingerprints),
        }))
    )
    for dim in schema.dimensions:
        table = store.dim(dim.name)
        sections.append(
            (f"dim:{dim.name}", _json_bytes({
                "columns": {attr: table.columns[attr] for attr in dim.attribute_names},
            }))
        )
    facts = store.view().facts
    fact_parts = [struct.pack("<IQ", len(schema.dimensions), facts.row_count)]
    for dim in schema.dimensions:
        fact_parts.append(facts.keys[dim.name].astype("<i4").tobytes())
    fact_parts.append(facts.amounts.astype("<i8").tobytes())
    sections.append(("facts", b"".join(fact_parts)))

    if mviews is not None:
        defs_doc = []
        built: list[tuple[str, Cuboid]] = []
        for name in mviews.names():
            definition = mviews.definition(name)
            state = mviews.state(name)
            defs_doc.append({
                "name": name,
                "choices": list(definition.spec.choices),
                "measures": [list(m) for m in definition.measures],
                "rewrite": definition.rewrite_enabled,
                "refresh_mode": definition.refresh_mode,
                "built_epoch": None if state is None else state.built_epoch,
            })
            if state is not None:
                built.append((name, state.data))
        sections.append(("mviews", _json_bytes(defs_doc)))
        for name, cuboid in built:
            sections.append((f"mvdata:{name}", _cells_payload(cuboid)))

    if cubes is not None:
        cube_doc = [
            {"choices": list(spec.choices), "epoch": cuboid.epoch}
            for spec, cuboid in cubes.items()
        ]
        sections.append(("cubes", _json_bytes(cube_doc)))
        for i, cuboid in enumerate(cubes.values()):
            sections.append((f"cubedata:{i}", _cells_payload(cuboid)))

    header = MAGIC + struct.pack("<II", FORMAT_VERSION, len(sections))
    header += schema.fingerprint().encode("ascii")
    body = b"".join(_pack_section(name, payload) for name, payload in sections)
    blob = header + body
    return blob + struct.pack("<I", zlib.crc32(blob))


def save_snapshot(path, store: ColumnStore, mviews: Optional[MViewCatalog] = None,
                  cubes: Optional[dict[GroupBySpec, Cuboid]] = None) -> None:
    """Write atomically: serialize to a temp file, then rename over the target."""
    path = Path(path)
    blob = serialize(store, mviews, cubes)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def _read_sections(blob: bytes) -> tuple[str, list[tuple[str, bytes]]]:
    if len(blob) < len(MAGIC) + 8 + 64 + 4:
        raise SnapshotError("snapshot truncated: missing header")
    if blob[: len(MAGIC)] != MAGIC:
        raise SnapshotError("not a warehouse snapshot (bad magic)")
    version, section_count = struct.unpack_from("<II", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported snapshot format version {version}")
    offset = len(MAGIC) + 8
    fingerprint = blob[offset:offset + 64].decode("ascii")
    offset += 64

    (file_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) != file_crc:
        raise SnapshotError("snapshot corrupt: file checksum mismatch")

    sections = []
    for _ in range(section_count):
        if offset + 2 > len(blob) - 4:
            raise SnapshotError("snapshot truncated: section header")
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + name_len].decode("ascii")
        offset += name_len
        payload_len, crc = struct.unpack_from("<QI", blob, offset)
        offset += 12
        payload = blob[offset:offset + payload_len]
        if len(payload) != payload_len:
            raise SnapshotError(f"snapshot truncated in section {name!r}")
        if zlib.crc32(payload) != crc:
            raise SnapshotError(f"snapshot corrupt: checksum mismatch in section {name!r}")
        offset += payload_len
        sections.append((name, payload))
    if offset != len(blob) - 4:
        raise SnapshotError("snapshot corrupt: trailing bytes after last section")
    return fingerprint, sections


def load_snapshot(path, schema: Optional[StarSchema] = None
                  ) -> tuple[ColumnStore, MViewCatalog, dict[GroupBySpec, Cuboid]]:
    """Rebuild store, view catalog and cuboids; verifies checksums and, when a
    schema is supplied, its fingerprint against the snapshot's."""
    blob = Path(path).read_bytes()
    fingerprint, sections = _read_sections(blob)
    by_name = dict(sections)

    if "schema" not in by_name:
        raise SnapshotError("snapshot has no schema section")
    snap_schema = load_schema(by_name["schema"].decode("utf-8"))
    if snap_schema.fingerprint() != fingerprint:
        raise SnapshotError("snapshot corrupt: schema fingerprint mismatch")
    if schema is not None and schema.fingerprint() != fingerprint:
        raise SnapshotError(
            "schema fingerprint mismatch: snapshot was written for a different schema"
        )
    schema = snap_schema

    store = ColumnStore(schema)
    meta = json.loads(by_name["meta"].decode("utf-8"))
    store.meta.epoch = int(meta["epoch"])
    store.meta.batch_fingerprints = [str(f) for f in meta["fingerprints"]]

    for dim in schema.dimensions:
        key = f"dim:{dim.name}"
        if key not in by_name:
            raise SnapshotError(f"snapshot missing section {key!r}")
        doc = json.loads(by_name[key].decode("utf-8"))
        table = store.dim(dim.name)
        columns = doc["columns"]
        lengths = {len(v) for v in columns.values()}
        if len(lengths) != 1:
            raise SnapshotError(f"snapshot corrupt: ragged columns in {key!r}")
        table.columns = {attr: list(columns[attr]) for attr in dim.attribute_names}
        key_attr = dim.natural_key
        table._index = {
            table.columns[key_attr][s]: s for s in range(1, len(table.columns[key_attr]))
        }

    payload = by_name["facts"]
    n_dims, n_rows = struct.unpack_from("<IQ", payload, 0)
    if n_dims != len(schema.dimensions):
        raise SnapshotError("snapshot corrupt: fact column count mismatch")
    offset = 12
    keys = {}
    for dim in schema.dimensions:
        keys[dim.name] = np.frombuffer(
            payload, dtype="<i4", count=n_rows, offset=offset
        ).astype(np.int32)
        offset += 4 * n_rows
    amounts = np.frombuffer(payload, dtype="<i8", count=n_rows, offset=offset).astype(np.int64)
    store._facts = type(store._facts)(keys=keys, amounts=amounts)

    view = store.view()
    mviews = MViewCatalog(schema)
    if "mviews" in by_name:
        for d in json.loads(by_name["mviews"].decode("utf-8")):
            spec = GroupBySpec(tuple(None if c is None else int(c) for c in d["choices"]))
            definition = MViewDef(
                name=d["name"],
                spec=spec,
                measures=tuple((a, m) for a, m in d["measures"]),
                rewrite_enabled=bool(d["rewrite"]),
                refresh_mode=d.get("refresh_mode", "on_demand"),
            )
            state = None
            if d["built_epoch"] is not None:
                data_key = f"mvdata:{d['name']}"
                if data_key not in by_name:
                    raise SnapshotError(f"snapshot missing section {data_key!r}")
                epoch = int(d["built_epoch"])
                state = MViewState(
                    data=_cells_restore(by_name[data_key], spec, epoch, view),
                    built_epoch=epoch,
                )
            mviews.restore(definition, state)

    cubes: dict[GroupBySpec, Cuboid] = {}
    if "cubes" in by_name:
        for i, d in enumerate(json.loads(by_name["cubes"].decode("utf-8"))):
            spec = GroupBySpec(tuple(None if c is None else int(c) for c in d["choices"]))
            data_key = f"cubedata:{i}"
            if data_key not in by_name:
                raise SnapshotError(f"snapshot missing section {data_key!r}")
            cubes[spec] = _cells_restore(by_name[data_key], spec, int(d["epoch"]), view)

    return store, mviews, cubes


def snapshot_info(path) -> dict:
    """Verify checksums and report the section inventory without loading."""
    blob = Path(path).read_bytes()
    fingerprint, sections = _read_sections(blob)
    meta = {}
    for name, payload in sections:
        if name == "meta":
            meta = json.loads(payload.decode("utf-8"))
    return {
        "fingerprint": fingerprint,
        "bytes": len(blob),
        "epoch": meta.get("epoch"),
        "sections": [
            {"name": name, "bytes": len(payload)} for name, payload in sections
        ],
    }
