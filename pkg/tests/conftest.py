from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cbe.config import PipelineConfig  # noqa: E402
from cbe.linker import Gazetteer  # noqa: E402
from cbe.pipeline import Pipeline  # noqa: E402
from cbe.synthetic import planted_benchmark  # noqa: E402

RUNNING_EXAMPLE = "higher-calorie diets patients anorexia nervosa shorten hospital stays via"
RUNNING_EXAMPLE_QIDS = ["Q26708069", "Q474191", "Q181600", "Q254327", "Q131749"]

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def example_gazetteer() -> Gazetteer:
    return Gazetteer(
        {
            "higher-calorie": ("Q26708069", None),
            "diets": ("Q474191", None),
            "patients": ("Q181600", None),
            "anorexia": ("Q254327", "Symptom"),
            "hospital": ("Q131749", None),
        }
    )


def planted_config(data_dir: Path, out_dir: Path, seed: int = 0, n_posts: int = 400, **extra: str) -> PipelineConfig:
    paths = planted_benchmark(seed=seed, n_posts=n_posts).write(data_dir)
    overrides = {
        "paths.corpus": str(paths["corpus"]),
        "paths.kg": str(paths["kg"]),
        "paths.gazetteer": str(paths["gazetteer"]),
        "paths.output": str(out_dir),
        "eval.seed": str(seed),
    }
    overrides.update(extra)
    return PipelineConfig.load(None, overrides, environ={})


@pytest.fixture(scope="session")
def planted_run(tmp_path_factory):
    """One full matrix run on the seed-0 planted benchmark, shared across tests."""
    base = tmp_path_factory.mktemp("planted0")
    cfg = planted_config(base / "data", base / "out", seed=0)
    pipe = Pipeline(cfg)
    results = pipe.matrix()
    return pipe, results


# settings that keep a full matrix run to a few seconds
FAST = {
    "eval.k": "3",
    "sgns_text.epochs": "2",
    "sgns_kg.epochs": "2",
    "sgns_text.dim": "8",
    "sgns_kg.dim": "8",
    "walks.max_walks": "10",
    "grid.logreg.epochs": "30",
    "grid.mlp.epochs": "30",
    "grid.mlp.hidden": "4",
    "grid.knn.k": "3",
}


# acceptance reporting: one line per criterion at the end of the run

_CRITERIA: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): an acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if rep.skipped:
            status = "SKIP"
        elif rep.passed:
            status = "PASS"
        else:
            status = "FAIL"
        if _CRITERIA.get(name) in (None, "PASS"):
            _CRITERIA[name] = status


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _CRITERIA.items():
        terminalreporter.write_line(f"{status}  {name}")
