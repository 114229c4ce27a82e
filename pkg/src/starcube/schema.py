"""Star-schema metadata: dimensions, hierarchy levels, measures and the fact shape.

Schema documents are a small TOML dialect (see docs/schema-format.md): one
``[fact]`` block, ``[[dimension]]`` blocks each carrying a
``[dimension.attributes]`` table and ordered ``[[dimension.level]]`` blocks.
Level ordinals are implicit in document order, finest first.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import SchemaError, SchemaValidationError

SCHEMA_VERSION = 1

AGGREGATORS = ("sum", "count", "average")
ATTRIBUTE_KINDS = ("text", "integer")

TIME_DIMENSION = "time"
TIME_LEVELS = ("day", "month", "quarter", "year")


@dataclass(frozen=True)
class LevelDef:
    """One hierarchy granularity; ordinal 0 is the finest."""

    name: str
    ordinal: int
    key_attribute: str
    label_attribute: str


@dataclass(frozen=True)
class DimensionDef:
    name: str
    levels: tuple[LevelDef, ...]
    member_attributes: tuple[tuple[str, str], ...]

    @property
    def natural_key(self) -> str:
        """Members are identified by the finest level's key attribute."""
        return self.levels[0].key_attribute

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.member_attributes)

    def attribute_kind(self, name: str) -> str:
        for attr, kind in self.member_attributes:
            if attr == name:
                return kind
        raise KeyError(name)

    def level(self, name: str) -> LevelDef:
        for lv in self.levels:
            if lv.name == name:
                return lv
        raise KeyError(f"dimension {self.name!r} has no level {name!r}")

    def has_level(self, name: str) -> bool:
        return any(lv.name == name for lv in self.levels)


@dataclass(frozen=True)
class MeasureDef:
    name: str
    aggregator: str
    unit: str = "millimes"


@dataclass(frozen=True)
class FactDef:
    name: str
    dimension_keys: tuple[tuple[str, str], ...]  # (dimension name, fact column)
    measures: tuple[MeasureDef, ...]

    def key_column(self, dimension: str) -> str:
        for dim, col in self.dimension_keys:
            if dim == dimension:
                return col
        raise KeyError(f"fact {self.name!r} has no key for dimension {dimension!r}")


@dataclass(frozen=True)
class StarSchema:
    fact: FactDef
    dimensions: tuple[DimensionDef, ...]
    _by_name: dict = field(init=False, repr=False, compare=False, hash=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {d.name: d for d in self.dimensions})

    @property
    def dimension_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def dimension(self, name: str) -> DimensionDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown dimension {name!r}") from None

    def has_dimension(self, name: str) -> bool:
        return name in self._by_name

    def dimension_index(self, name: str) -> int:
        for i, d in enumerate(self.dimensions):
            if d.name == name:
                return i
        raise KeyError(name)

    def measure(self, name: str) -> MeasureDef:
        for m in self.fact.measures:
            if m.name == name:
                return m
        raise KeyError(f"unknown measure {name!r}")

    def find_level(self, level_name: str) -> tuple[str, str]:
        """Resolve a bare level name to (dimension, level); unique match required."""
        hits = [(d.name, level_name) for d in self.dimensions if d.has_level(level_name)]
        if not hits:
            raise KeyError(f"no dimension has a level named {level_name!r}")
        if len(hits) > 1:
            dims = ", ".join(d for d, _ in hits)
            raise KeyError(f"level {level_name!r} is ambiguous across dimensions: {dims}")
        return hits[0]

    def fingerprint(self) -> str:
        return hashlib.sha256(serialize_schema(self).encode("utf-8")).hexdigest()


def validate(schema: StarSchema) -> list[str]:
    """Return every invariant violation as a human-readable string (empty = valid)."""
    out: list[str] = []
    seen_dims: set[str] = set()
    for dim in schema.dimensions:
        if dim.name in seen_dims:
            out.append(f"duplicate dimension {dim.name!r}")
        seen_dims.add(dim.name)

        if not dim.levels:
            out.append(f"dimension {dim.name!r} has no levels")
            continue

        attr_names = [name for name, _ in dim.member_attributes]
        if len(set(attr_names)) != len(attr_names):
            out.append(f"dimension {dim.name!r} has duplicate attribute names")
        for name, kind in dim.member_attributes:
            if kind not in ATTRIBUTE_KINDS:
                out.append(f"dimension {dim.name!r} attribute {name!r} has unknown kind {kind!r}")

        level_names = [lv.name for lv in dim.levels]
        if len(set(level_names)) != len(level_names):
            out.append(f"dimension {dim.name!r} has duplicate level names")
        ordinals = [lv.ordinal for lv in dim.levels]
        if ordinals != list(range(len(dim.levels))):
            out.append(
                f"dimension {dim.name!r} level ordinals {ordinals} are not consecutive from 0"
            )
        for lv in dim.levels:
            for role, attr in (("key", lv.key_attribute), ("label", lv.label_attribute)):
                if attr not in attr_names:
                    out.append(
                        f"dimension {dim.name!r} level {lv.name!r} {role} attribute "
                        f"{attr!r} is not a member attribute"
                    )

    if schema.has_dimension(TIME_DIMENSION):
        names = tuple(lv.name for lv in schema.dimension(TIME_DIMENSION).levels)
        if names != TIME_LEVELS:
            out.append(
                f"time dimension levels must be {'<'.join(TIME_LEVELS)}, got {'<'.join(names)}"
            )

    fact = schema.fact
    key_dims = [dim for dim, _ in fact.dimension_keys]
    if len(set(key_dims)) != len(key_dims):
        out.append(f"fact {fact.name!r} references a dimension through more than one key")
    key_cols = [col for _, col in fact.dimension_keys]
    if len(set(key_cols)) != len(key_cols):
        out.append(f"fact {fact.name!r} has duplicate key column names")
    for dim in key_dims:
        if not schema.has_dimension(dim):
            out.append(f"unresolved dimension key: fact references unknown dimension {dim!r}")
    for dim in schema.dimensions:
        if dim.name not in key_dims:
            out.append(f"dimension {dim.name!r} is not referenced by the fact table")

    measure_names = [m.name for m in fact.measures]
    if not measure_names:
        out.append(f"fact {fact.name!r} has no measures")
    if len(set(measure_names)) != len(measure_names):
        out.append(f"fact {fact.name!r} has duplicate measure names")
    for m in fact.measures:
        if m.aggregator not in AGGREGATORS:
            out.append(f"measure {m.name!r} has unsupported aggregator {m.aggregator!r}")

    return out


# ---------------------------------------------------------------------------
# Document parsing / serialization


def _require(table: dict, key: str, kind: type, where: str):
    if key not in table:
        raise SchemaError(f"missing required key {key!r}", field=where)
    value = table[key]
    if not isinstance(value, kind):
        raise SchemaError(
            f"key {key!r} must be {kind.__name__}, got {type(value).__name__}", field=where
        )
    return value


def load_schema(text: str) -> StarSchema:
    """Parse and validate a schema document; raises on any parse error or violation."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"not a well-formed schema document: {exc}") from exc

    version = _require(doc, "schema_version", int, "schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}", field="schema_version")

    dims = []
    for i, dim_doc in enumerate(doc.get("dimension", [])):
        where = f"dimension[{i}]"
        name = _require(dim_doc, "name", str, where)
        attrs = _require(dim_doc, "attributes", dict, where)
        member_attributes = tuple((attr, kind) for attr, kind in attrs.items())
        levels = []
        for ordinal, lv_doc in enumerate(dim_doc.get("level", [])):
            lv_where = f"{where}.level[{ordinal}]"
            levels.append(
                LevelDef(
                    name=_require(lv_doc, "name", str, lv_where),
                    ordinal=ordinal,
                    key_attribute=_require(lv_doc, "key", str, lv_where),
                    label_attribute=_require(lv_doc, "label", str, lv_where),
                )
            )
        dims.append(DimensionDef(name=name, levels=tuple(levels), member_attributes=member_attributes))

    if "fact" not in doc:
        raise SchemaError("missing [fact] block", field="fact")
    fact_doc = doc["fact"]
    fact_name = _require(fact_doc, "name", str, "fact")
    keys_doc = _require(fact_doc, "keys", dict, "fact")
    dimension_keys = tuple((dim, col) for dim, col in keys_doc.items())
    measures = []
    for j, m_doc in enumerate(fact_doc.get("measure", [])):
        m_where = f"fact.measure[{j}]"
        measures.append(
            MeasureDef(
                name=_require(m_doc, "name", str, m_where),
                aggregator=_require(m_doc, "aggregator", str, m_where),
                unit=m_doc.get("unit", "millimes"),
            )
        )
    fact = FactDef(name=fact_name, dimension_keys=dimension_keys, measures=tuple(measures))

    schema = StarSchema(fact=fact, dimensions=tuple(dims))
    violations = validate(schema)
    if violations:
        raise SchemaValidationError(violations)
    return schema


def _toml_str(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def serialize_schema(schema: StarSchema) -> str:
    """Canonical schema document; load_schema(serialize_schema(s)) == s."""
    lines = [f"schema_version = {SCHEMA_VERSION}", ""]
    lines.append("[fact]")
    lines.append(f"name = {_toml_str(schema.fact.name)}")
    lines.append("")
    lines.append("[fact.keys]")
    for dim, col in schema.fact.dimension_keys:
        lines.append(f"{dim} = {_toml_str(col)}")
    for m in schema.fact.measures:
        lines.append("")
        lines.append("[[fact.measure]]")
        lines.append(f"name = {_toml_str(m.name)}")
        lines.append(f"aggregator = {_toml_str(m.aggregator)}")
        lines.append(f"unit = {_toml_str(m.unit)}")
    for dim in schema.dimensions:
        lines.append("")
        lines.append("[[dimension]]")
        lines.append(f"name = {_toml_str(dim.name)}")
        lines.append("")
        lines.append("[dimension.attributes]")
        for attr, kind in dim.member_attributes:
            lines.append(f"{attr} = {_toml_str(kind)}")
        for lv in dim.levels:
            lines.append("")
            lines.append("[[dimension.level]]")
            lines.append(f"name = {_toml_str(lv.name)}")
            lines.append(f"key = {_toml_str(lv.key_attribute)}")
            lines.append(f"label = {_toml_str(lv.label_attribute)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Built-in default: insured-account movements warehouse

NSSF_SCHEMA_DOC = """\
schema_version = 1

[fact]
name = "mvtass"

[fact.keys]
insured = "num_assure"
office = "code_br"
time = "date_mvt"
payment = "code_paiement"
regime = "code_regime"
prestation = "code_prestation"

[[fact.measure]]
name = "montant"
aggregator = "sum"
unit = "millimes"

[[dimension]]
name = "insured"

[dimension.attributes]
num_assure = "text"
nom_assure = "text"
etat_civil = "text"

[[dimension.level]]
name = "insured"
key = "num_assure"
label = "nom_assure"

[[dimension]]
name = "office"

[dimension.attributes]
code_br = "text"
nom_br = "text"
code_postal = "text"
governorate = "text"

[[dimension.level]]
name = "office"
key = "code_br"
label = "nom_br"

[[dimension.level]]
name = "governorate"
key = "governorate"
label = "governorate"

[[dimension]]
name = "time"

[dimension.attributes]
day = "text"
month = "text"
quarter = "text"
year = "text"

[[dimension.level]]
name = "day"
key = "day"
label = "day"

[[dimension.level]]
name = "month"
key = "month"
label = "month"

[[dimension.level]]
name = "quarter"
key = "quarter"
label = "quarter"

[[dimension.level]]
name = "year"
key = "year"
label = "year"

[[dimension]]
name = "payment"

[dimension.attributes]
code_paiement = "text"
libelle_paiement = "text"

[[dimension.level]]
name = "payment"
key = "code_paiement"
label = "libelle_paiement"

[[dimension]]
name = "regime"

[dimension.attributes]
code_regime = "text"
libelle_regime = "text"

[[dimension.level]]
name = "regime"
key = "code_regime"
label = "libelle_regime"

[[dimension]]
name = "prestation"

[dimension.attributes]
code_prestation = "text"
libelle_prestation = "text"

[[dimension.level]]
name = "prestation"
key = "code_prestation"
label = "libelle_prestation"
"""


def nssf_default_schema() -> StarSchema:
    """The built-in insured-movements schema: fact mvtass with six dimensions."""
    return load_schema(NSSF_SCHEMA_DOC)
