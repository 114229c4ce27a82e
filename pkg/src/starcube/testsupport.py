"""Helpers for benchmarks and performance tests: build a large in-memory
warehouse through the bulk columnar insert path, skipping file ETL."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .datagen import (
    GOVERNORATES,
    MARITAL,
    PAYMENT_MODES,
    PRESTATION_CODES,
    PRESTATION_LABELS,
    REGIME_CODES,
    REGIME_LABELS,
)
from .engine import Engine
from .schema import nssf_default_schema
from .store import day_attributes


def bulk_synthetic_engine(seed: int = 42, facts: int = 1_000_000, offices: int = 41,
                          governorates: int = 24, insured: int = 5_000,
                          start_day: str = "2008-01-01", days: int = 731) -> Engine:
    """In-memory warehouse at the usual cardinalities with ``facts`` random rows."""
    engine = Engine(schema=nssf_default_schema())
    store = engine.store

    govs = GOVERNORATES[:governorates]
    store.insert_members("office", [
        {
            "code_br": str(10 + i),
            "nom_br": govs[i % governorates] if i < governorates
            else f"{govs[i % governorates]} {i // governorates + 1}",
            "code_postal": str(1000 + i),
            "governorate": govs[i % governorates],
        }
        for i in range(offices)
    ])
    store.insert_members("regime", [
        {"code_regime": c, "libelle_regime": REGIME_LABELS[c]} for c in REGIME_CODES
    ])
    store.insert_members("prestation", [
        {"code_prestation": c, "libelle_prestation": PRESTATION_LABELS[c]}
        for c in PRESTATION_CODES
    ])
    store.insert_members("payment", [
        {"code_paiement": c, "libelle_paiement": l} for c, l in PAYMENT_MODES
    ])
    store.insert_members("insured", [
        {"num_assure": f"A{i + 1:07d}", "nom_assure": f"ASSURE {i + 1}",
         "etat_civil": MARITAL[i % len(MARITAL)]}
        for i in range(insured)
    ])
    first = date.fromisoformat(start_day)
    store.insert_members("time", [
        day_attributes((first + timedelta(days=i)).isoformat()) for i in range(days)
    ])

    rng = np.random.default_rng(seed)

    def skewed(count: int, exponent: float = 0.8) -> np.ndarray:
        weights = 1.0 / np.arange(1, count + 1) ** exponent
        weights /= weights.sum()
        return rng.choice(np.arange(1, count + 1, dtype=np.int32), size=facts, p=weights)

    prest = skewed(len(PRESTATION_CODES), 0.5)
    magnitudes = np.minimum(rng.lognormal(11.0, 1.4, facts), 1e12).astype(np.int64) + 100
    signs = np.where(prest <= 4, 1, -1)  # codes 66-69 contribute, 76-79 pay out

    keys = {
        "insured": skewed(insured),
        "office": skewed(offices),
        "time": skewed(days, 0.2),
        "payment": skewed(len(PAYMENT_MODES), 0.5),
        "regime": skewed(len(REGIME_CODES), 0.5),
        "prestation": prest,
    }
    store.insert_fact_columns(keys, signs * magnitudes)
    return engine
