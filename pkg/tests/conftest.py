import numpy as np
import pytest

from repsample.dataset import FeatureSpec, TabularDataset


@pytest.fixture
def mixed_dataset():
    """Small dataset with one feature of each kind plus a target."""
    schema = [
        FeatureSpec("age", "continuous", role="input"),
        FeatureSpec("sex", "binary", ("1", "2"), role="input"),
        FeatureSpec("race", "categorical", tuple("123456789"), role="protected"),
        FeatureSpec("income", "continuous", role="target"),
    ]
    rng = np.random.default_rng(7)
    n = 60
    columns = {
        "age": rng.uniform(17, 90, n).round(1),
        "sex": rng.integers(0, 2, n),
        "race": rng.integers(0, 9, n),
        "income": rng.uniform(100, 5000, n).round(2),
    }
    return TabularDataset(schema, columns, source_id="toy")


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
