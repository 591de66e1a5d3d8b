import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parents[1]))

from mcdtrain.data import write_synthetic_corpus


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small synthetic heartbeat corpus shared by the trainer tests."""
    d = tmp_path_factory.mktemp("corpus")
    train_f, test_f = write_synthetic_corpus(
        d, train_per_class=(48, 8, 8, 8), test_per_class=(48, 16, 16, 16), seed=7
    )
    return train_f, test_f
