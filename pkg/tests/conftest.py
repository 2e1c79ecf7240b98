from pathlib import Path

import pytest

from udsdm.ingest import synthesize_lab_file
from udsdm.lstm import TrainConfig
from udsdm.simulator import ModelCache, SimConfig


@pytest.fixture(scope="session")
def small_log(tmp_path_factory) -> Path:
    """A short synthetic sensor log (about 20k lines)."""
    path = tmp_path_factory.mktemp("data") / "small.txt"
    synthesize_lab_file(path, n_epochs=400, seed=7)
    return path


@pytest.fixture(scope="session")
def quick_config(small_log) -> SimConfig:
    """Three nodes and a cheap LSTM, enough to exercise every code path."""
    return SimConfig(
        n_nodes=3, epoch_length=50, theta=0.6, dataset=str(small_log), experiments=2,
        lstm=TrainConfig(epochs=8, hidden_size=8, max_windows=128),
    )


@pytest.fixture(scope="session")
def quick_cache() -> ModelCache:
    return ModelCache()


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when == "call":
                lines.extend(v for k, v in rep.user_properties if k == "acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
