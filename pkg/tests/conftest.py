import pytest

from agents.synth_agent import SynthConfig, gen_dataset
from tests.helpers import make_document


@pytest.fixture
def receipt():
    return make_document("r1", [
        ("Trà", (10, 10, 40, 20)),
        ("đào", (45, 11, 70, 21)),
        ("50.000", (120, 10, 170, 20)),
        ("Tổng", (10, 60, 40, 70)),
        ("50000", (120, 61, 170, 71)),
    ])


@pytest.fixture
def grid_dataset():
    config = SynthConfig(seed=3, rows=2, cols=2, vocab_size=8, duplicate_fraction=0.0, task="quadrant-lookup",
                         shuffle=True)
    return config, gen_dataset(config, 20)
