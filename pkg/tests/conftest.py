from __future__ import annotations

import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from cheeger_lab.graph import Graph, complete_graph, cycle_graph, petersen_graph  # noqa: E402


@pytest.fixture
def k4() -> Graph:
    return complete_graph(4)


@pytest.fixture
def c6() -> Graph:
    return cycle_graph(6)


@pytest.fixture
def petersen() -> Graph:
    return petersen_graph()


SMALL_CONFIG = {"sizes": [8, 10], "counts": {"8": 60, "10": 60}, "master_seed": 7, "threads": 1}


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory) -> Path:
    """records_n8.jsonl and records_n10.jsonl, 60 records each."""
    from cheeger_lab.research.config import config_from_dict
    from cheeger_lab.research.dataset import build_dataset

    out = tmp_path_factory.mktemp("dataset")
    build_dataset(config_from_dict(SMALL_CONFIG), out)
    return out


@pytest.fixture(scope="session")
def small_dataset(small_dataset_dir):
    from cheeger_lab.research.dataset import group_by_size, load_records

    return group_by_size(load_records([small_dataset_dir]))
