import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attnbalance.bench.pool import synthesize_annotation_pool, synthesize_view_pool


@pytest.fixture(scope="session")
def annotation_pool():
    return synthesize_annotation_pool(seed=11)


@pytest.fixture(scope="session")
def view_pool():
    records, matrix = synthesize_view_pool(seed=11)
    return records, matrix
