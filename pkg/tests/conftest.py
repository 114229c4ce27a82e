from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from starcube.datagen import GenSpec, generate
from starcube.engine import Engine
from starcube.etl.pipeline import parse_pipeline_config

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    derandomize=True,  # reproducible example streams across runs
    # store fixtures are read-only under @given; not resetting them is fine
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("suite")

REPO_ROOT = Path(__file__).resolve().parents[1]
FIGURE3_DIR = REPO_ROOT / "fixtures" / "figure3"


def run_config(engine: Engine, config_path: Path):
    config = parse_pipeline_config(config_path.read_text(encoding="utf-8"),
                                   config_path.parent)
    return engine.run_etl(config)


@pytest.fixture(scope="session")
def figure3_engine(tmp_path_factory) -> Engine:
    """Warehouse loaded from the checked-in Figure 3 fixture."""
    wh = tmp_path_factory.mktemp("figure3-wh")
    engine = Engine.open_or_create(wh)
    report = run_config(engine, FIGURE3_DIR / "pipeline.toml")
    assert report.reconciles()
    assert report.targets["fact"].inserted == 33
    return engine


@pytest.fixture(scope="session")
def seed42_dir(tmp_path_factory) -> Path:
    """Generated seed-42 source tree at the acceptance cardinalities (10k facts)."""
    out = tmp_path_factory.mktemp("seed42-gen")
    generate(GenSpec(seed=42, facts=10_000, insured=1_000), out)
    return out


@pytest.fixture(scope="session")
def seed42_engine(tmp_path_factory, seed42_dir) -> Engine:
    """Warehouse loaded from the seed-42 sources via the full ETL pipeline."""
    wh = tmp_path_factory.mktemp("seed42-wh")
    engine = Engine.open_or_create(wh)
    report = run_config(engine, seed42_dir / "pipeline.toml")
    assert report.reconciles()
    assert report.targets["fact"].inserted == 10_000
    return engine
