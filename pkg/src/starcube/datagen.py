"""Deterministic synthetic source generator at realistic cardinalities:
41 offices across 24 governorates, 6 schemes, 8 benefit types.

Emits the three staging formats (fixed-width mainframe records, delimited
text, spreadsheet exports saved as semicolon text), a pipeline config wired to
them, and a manifest of expected counts for end-to-end reconciliation. Output
is byte-identical for a given spec.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

from .errors import StarcubeError

GOVERNORATES = (
    "ARIANA", "BEJA", "BEN AROUS", "BIZERTE", "GABES", "GAFSA", "JENDOUBA",
    "KAIROUAN", "KASSERINE", "KEBILI", "KEF", "MAHDIA", "MANOUBA", "MEDENINE",
    "MONASTIR", "NABEUL", "SFAX", "SIDI BOUZID", "SILIANA", "SOUSSE",
    "TATAOUINE", "TOZEUR", "TUNIS", "ZAGHOUAN",
)

REGIME_CODES = ("RSNA", "RSA", "RSAA", "RTNS", "RTTE", "RACI")
REGIME_LABELS = {
    "RSNA": "SALARIES NON AGRICOLES",
    "RSA": "SALARIES AGRICOLES",
    "RSAA": "SALARIES AGRICOLES AMELIORE",
    "RTNS": "TRAVAILLEURS NON SALARIES",
    "RTTE": "TRAVAILLEURS TUNISIENS A L'ETRANGER",
    "RACI": "ASSURANCE CHOMAGE ET INTERMITTENTS",
}

# Benefit codes follow the in-house numbering: 66-69 are contribution-side
# movements (positive amounts), 76-79 are payout-side (negative amounts).
PRESTATION_CODES = ("66", "67", "68", "69", "76", "77", "78", "79")
PRESTATION_LABELS = {
    "66": "COTISATIONS REGULARISEES",
    "67": "MAJORATIONS DE RETARD",
    "68": "COTISATIONS TRIMESTRIELLES",
    "69": "REGULARISATIONS DIVERSES",
    "76": "INDEMNITES DE MALADIE",
    "77": "ALLOCATIONS FAMILIALES",
    "78": "PENSIONS DE RETRAITE",
    "79": "CAPITAL DECES ET SURVIVANTS",
}

PAYMENT_MODES = (
    ("01", "VIREMENT BANCAIRE"),
    ("02", "CHEQUE"),
    ("03", "ESPECES"),
    ("04", "MANDAT POSTAL"),
)

FIRST_NAMES = (
    "MOHAMED", "ALI", "FATMA", "SONIA", "AHMED", "LEILA", "SAMI", "NADIA",
    "KARIM", "AMEL", "HEDI", "SALWA", "TAREK", "MONIA", "RIDHA", "INES",
)
LAST_NAMES = (
    "BEN SALAH", "TRABELSI", "JEBALI", "GHARBI", "MESSAOUDI", "BOUAZIZI",
    "KHELIFI", "HAMDI", "CHAABANE", "SASSI", "DRIDI", "MAKHLOUF",
)

MARITAL = ("CELIBATAIRE", "MARIE", "DIVORCE", "VEUF")

OFFICE_LAYOUT = (
    ("code_br", 0, 4, "text"),
    ("nom_br", 4, 24, "text"),
    ("code_postal", 28, 8, "text"),
    ("governorate", 36, 20, "text"),
)
OFFICE_RECORD_LENGTH = 56

FACT_LAYOUT = (
    ("num_assure", 0, 10, "text"),
    ("code_br", 10, 4, "text"),
    ("date_mvt", 14, 8, "date_yyyymmdd"),
    ("code_paiement", 22, 4, "text"),
    ("code_regime", 26, 6, "text"),
    ("code_prestation", 32, 4, "text"),
    ("montant", 36, 14, "zoned_amount"),
)
FACT_RECORD_LENGTH = 50

_OVERPUNCH_NEGATIVE = "}JKLMNOPQR"


@dataclass(frozen=True)
class GenSpec:
    seed: int = 42
    facts: int = 10_000
    offices: int = 41
    governorates: int = 24
    regimes: int = 6
    prestations: int = 8
    payments: int = 4
    insured: int = 1_000
    start_day: str = "2008-01-01"
    end_day: str = "2009-12-31"
    dirty: bool = False

    def __post_init__(self):
        for name in ("facts", "offices", "governorates", "regimes", "prestations",
                     "payments", "insured"):
            if getattr(self, name) < 1:
                raise StarcubeError(f"GenSpec.{name} must be >= 1")
        if self.governorates > self.offices:
            raise StarcubeError("governorates cannot exceed offices")
        if self.governorates > len(GOVERNORATES):
            raise StarcubeError(f"at most {len(GOVERNORATES)} governorates available")
        if self.regimes > len(REGIME_CODES):
            raise StarcubeError(f"at most {len(REGIME_CODES)} regimes available")
        if self.prestations > len(PRESTATION_CODES):
            raise StarcubeError(f"at most {len(PRESTATION_CODES)} prestations available")
        if self.payments > len(PAYMENT_MODES):
            raise StarcubeError(f"at most {len(PAYMENT_MODES)} payment modes available")
        if date.fromisoformat(self.end_day) < date.fromisoformat(self.start_day):
            raise StarcubeError("end_day before start_day")


def encode_zoned(amount: int, width: int) -> str:
    """Zoned sign encoding: negatives overpunch the last digit."""
    digits = str(abs(amount))
    if amount < 0:
        digits = digits[:-1] + _OVERPUNCH_NEGATIVE[int(digits[-1])]
    if len(digits) > width:
        raise StarcubeError(f"amount {amount} wider than {width} bytes")
    return digits.rjust(width, "0")


def _fixed_line(layout, record_length: int, values: dict) -> str:
    buf = [" "] * record_length
    for name, offset, width, _kind in layout:
        text = values[name]
        if len(text) > width:
            raise StarcubeError(f"field {name}={text!r} exceeds width {width}")
        buf[offset:offset + len(text)] = text
    return "".join(buf)


def _zipf_weights(n: int, exponent: float = 0.8) -> list[float]:
    return [1.0 / (i + 1) ** exponent for i in range(n)]


def generate(spec: GenSpec, out_dir) -> dict:
    """Write all source files + pipeline.toml + manifest.toml; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    # offices: spread over governorates round-robin so every governorate is used
    governorates = GOVERNORATES[: spec.governorates]
    office_rows = []
    for i in range(spec.offices):
        gov = governorates[i % spec.governorates]
        nth = i // spec.governorates
        nom = gov if nth == 0 else f"{gov} {nth + 1}"
        office_rows.append({
            "code_br": str(10 + i),
            "nom_br": nom,
            "code_postal": str(1000 + 10 * i),
            "governorate": gov,
        })
    office_lines = [
        _fixed_line(OFFICE_LAYOUT, OFFICE_RECORD_LENGTH, row) for row in office_rows
    ]
    (out / "bureaux.dat").write_text("\n".join(office_lines) + "\n", encoding="latin-1")

    regimes = REGIME_CODES[: spec.regimes]
    _write_csv(out / "regimes.csv", ["code_regime", "libelle_regime"],
               [[c, REGIME_LABELS[c]] for c in regimes], delimiter=",")

    prestations = PRESTATION_CODES[: spec.prestations]
    _write_csv(out / "prestations.csv", ["code_prestation", "libelle_prestation"],
               [[c, PRESTATION_LABELS[c]] for c in prestations], delimiter=",")

    payments = PAYMENT_MODES[: spec.payments]
    _write_csv(out / "paiements.csv", ["code_paiement", "libelle_paiement"],
               [list(p) for p in payments], delimiter=",")

    insured_rows = []
    for i in range(spec.insured):
        insured_rows.append([
            f"A{i + 1:07d}",
            f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}",
            rng.choice(MARITAL),
        ])
    _write_csv(out / "assures.txt", ["num_assure", "nom_assure", "etat_civil"],
               insured_rows, delimiter=";")

    # optional second office source: same offices, one conflicting name, lower priority
    conflict_rows = 0
    if spec.dirty:
        excel_rows = [list(r.values()) for r in office_rows[: min(5, len(office_rows))]]
        excel_rows[0][1] = excel_rows[0][1] + " NORD"  # loses to the mainframe source
        conflict_rows = 1
        _write_csv(out / "bureaux_excel.txt",
                   ["code_br", "nom_br", "code_postal", "governorate"],
                   excel_rows, delimiter=";")

    # facts: skewed member popularity, contribution/payout sign by benefit code
    start = date.fromisoformat(spec.start_day)
    n_days = (date.fromisoformat(spec.end_day) - start).days + 1
    insured_pick = rng.choices(range(spec.insured), weights=_zipf_weights(spec.insured),
                               k=spec.facts)
    office_pick = rng.choices(range(spec.offices), weights=_zipf_weights(spec.offices),
                              k=spec.facts)
    prestation_pick = rng.choices(range(spec.prestations),
                                  weights=_zipf_weights(spec.prestations, 0.5),
                                  k=spec.facts)
    regime_pick = rng.choices(range(spec.regimes),
                              weights=_zipf_weights(spec.regimes, 0.5), k=spec.facts)
    payment_pick = rng.choices(range(spec.payments),
                               weights=_zipf_weights(spec.payments, 0.5), k=spec.facts)

    fact_lines = []
    total = 0
    for i in range(spec.facts):
        code = prestations[prestation_pick[i]]
        magnitude = int(rng.lognormvariate(11.0, 1.4)) + 100
        amount = magnitude if code in ("66", "67", "68", "69") else -magnitude
        total += amount
        day = start + timedelta(days=rng.randrange(n_days))
        fact_lines.append(_fixed_line(FACT_LAYOUT, FACT_RECORD_LENGTH, {
            "num_assure": f"A{insured_pick[i] + 1:07d}",
            "code_br": str(10 + office_pick[i]),
            "date_mvt": day.strftime("%Y%m%d"),
            "code_paiement": payments[payment_pick[i]][0],
            "code_regime": regimes[regime_pick[i]],
            "code_prestation": code,
            "montant": encode_zoned(amount, 14),
        }))

    expected_rejected = 0
    if spec.dirty:
        # unknown office, impossible date, malformed amount: all must reject
        bad = [
            {"num_assure": "A0000001", "code_br": "9999", "date_mvt": "20090115",
             "code_paiement": payments[0][0], "code_regime": regimes[0],
             "code_prestation": prestations[0], "montant": encode_zoned(1000, 14)},
            {"num_assure": "A0000001", "code_br": "10", "date_mvt": "20091340",
             "code_paiement": payments[0][0], "code_regime": regimes[0],
             "code_prestation": prestations[0], "montant": encode_zoned(1000, 14)},
            {"num_assure": "A0000001", "code_br": "10", "date_mvt": "20090116",
             "code_paiement": payments[0][0], "code_regime": regimes[0],
             "code_prestation": prestations[0], "montant": "XXXXXXXXXXXXXX"},
        ]
        for row in bad:
            fact_lines.append(_fixed_line(FACT_LAYOUT, FACT_RECORD_LENGTH, row))
        expected_rejected = len(bad)

    (out / "mvt.dat").write_text("\n".join(fact_lines) + "\n", encoding="latin-1")

    (out / "pipeline.toml").write_text(_pipeline_doc(spec), encoding="utf-8")

    manifest = {
        "seed": spec.seed,
        "offices": spec.offices,
        "governorates": spec.governorates,
        "regimes": spec.regimes,
        "prestations": spec.prestations,
        "payments": spec.payments,
        "insured": spec.insured,
        "facts": spec.facts,
        "facts_total_millimes": total,
        "expected_rejected": expected_rejected,
        "conflicts": conflict_rows,
    }
    manifest_lines = ["manifest_version = 1", ""]
    manifest_lines += [f"{k} = {v}" for k, v in manifest.items()]
    (out / "manifest.toml").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    return manifest


def _write_csv(path: Path, header: list[str], rows: list[list[str]], delimiter: str):
    lines = [delimiter.join(header)]
    for row in rows:
        lines.append(delimiter.join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _layout_toml(layout, record_length: int) -> str:
    fields = ", ".join(
        f'["{name}", {offset}, {width}, "{kind}"]' for name, offset, width, kind in layout
    )
    return f"record_length = {record_length}\nfields = [{fields}]"


def _pipeline_doc(spec: GenSpec) -> str:
    parts = [
        "config_version = 1",
        'schema = "nssf-default"',
        "",
        "[options]",
        'unresolved_keys = "reject"',
        "auto_refresh = true",
        "",
        "[[source]]",
        'id = "offices-cics"',
        'kind = "fixed_width"',
        'path = "bureaux.dat"',
        'target = "office"',
        "priority = 2",
        "",
        "[source.layout]",
        _layout_toml(OFFICE_LAYOUT, OFFICE_RECORD_LENGTH),
    ]
    if spec.dirty:
        parts += [
            "",
            "[[source]]",
            'id = "offices-excel"',
            'kind = "sheet_export"',
            'path = "bureaux_excel.txt"',
            'target = "office"',
            "priority = 1",
        ]
    parts += [
        "",
        "[[source]]",
        'id = "regimes"',
        'kind = "delimited"',
        'path = "regimes.csv"',
        'target = "regime"',
        "",
        "[[source]]",
        'id = "prestations"',
        'kind = "delimited"',
        'path = "prestations.csv"',
        'target = "prestation"',
        "",
        "[[source]]",
        'id = "paiements"',
        'kind = "delimited"',
        'path = "paiements.csv"',
        'target = "payment"',
        "",
        "[[source]]",
        'id = "assures"',
        'kind = "sheet_export"',
        'path = "assures.txt"',
        'target = "insured"',
        "",
        "[[source]]",
        'id = "mouvements"',
        'kind = "fixed_width"',
        'path = "mvt.dat"',
        'target = "fact"',
        "",
        "[source.layout]",
        _layout_toml(FACT_LAYOUT, FACT_RECORD_LENGTH),
        "",
        "[[mview]]",
        'name = "MvtRegPresBr"',
        "rewrite = true",
        'measures = [["sum", "montant"]]',
        "",
        "[mview.group_by]",
        'regime = "regime"',
        'prestation = "prestation"',
        'office = "office"',
        "",
    ]
    return "\n".join(parts)
