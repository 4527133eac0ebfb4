import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tkgqa.kg import TemporalKG, TemporalFact  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def obama_kg(tmp_path):
    path = tmp_path / "facts.tsv"
    path.write_text("Barack Obama\tposition held\tPresident of USA\t2008\t2016\n")
    return path


@pytest.fixture
def tiny_kg():
    """Five facts over six entities, two predicates, handy for training smokes."""
    return TemporalKG(
        entities=["ada", "babbage", "carol", "acme", "globex", "initech"],
        predicates=["leader", "member"],
        timestamps=[2000, 2002, 2005, 2008, 2010],
        facts=[
            TemporalFact(0, 0, 3, 0, 1),
            TemporalFact(1, 0, 3, 2, 3),
            TemporalFact(2, 0, 4, 0, 2),
            TemporalFact(0, 1, 5, 3, 4),
            TemporalFact(1, 1, 4, 4, 4),
        ],
    )
