import sys
from pathlib import Path

import numpy as np
import pytest

from fdeval import PredictionBundle, ShiftTag, validate_bundle

REPO = Path(__file__).resolve().parent.parent


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def toy_bundle_dir() -> Path:
    return REPO / "data" / "toy_bundle"


def random_instance(rng, n=None, tie_density=0.0, failure_rate=0.3):
    """Confidence/residual pair with controllable tie mass and failure rate."""
    if n is None:
        n = int(rng.integers(1, 501))
    conf = rng.random(n)
    if tie_density > 0:
        snap = rng.random(n) < tie_density
        levels = np.array([0.2, 0.5, 0.8])
        conf[snap] = levels[rng.integers(0, levels.size, int(snap.sum()))]
    residuals = (rng.random(n) < failure_rate).astype(np.int8)
    return conf, residuals


def both_outcomes_instance(rng, n, tie_density=0.0, failure_rate=0.3):
    """Like random_instance but guaranteed to contain a success and a failure."""
    conf, res = random_instance(rng, n=max(n, 2), tie_density=tie_density, failure_rate=failure_rate)
    if res.sum() == 0:
        res[int(rng.integers(0, res.size))] = 1
    if res.sum() == res.size:
        res[int(rng.integers(0, res.size))] = 0
    return conf, res


def simple_bundle(logits, labels, tags=None, **kw) -> PredictionBundle:
    logits = np.asarray(logits, dtype=np.float64)
    if tags is None:
        tags = np.full(logits.shape[0], ShiftTag.IID.value, dtype="U24")
    else:
        tags = np.asarray(tags, dtype="U24")
    return validate_bundle(
        PredictionBundle(logits=logits, labels=np.asarray(labels), shift_tags=tags, **kw)
    )


def newclass_bundle() -> PredictionBundle:
    """10 samples: 6 IID (2 misclassified) + 4 new-class, 3 inlier classes."""
    logits = np.array(
        [
            [3.0, 0.0, 0.0],   # IID, pred 0, label 0, correct
            [0.0, 3.0, 0.0],   # IID, pred 1, label 1, correct
            [0.0, 0.0, 3.0],   # IID, pred 2, label 2, correct
            [2.5, 0.5, 0.0],   # IID, pred 0, label 0, correct
            [2.0, 1.0, 0.0],   # IID, pred 0, label 1, failure
            [0.0, 1.5, 1.0],   # IID, pred 1, label 2, failure
            [1.2, 1.0, 0.8],   # new-class semantic
            [1.1, 1.0, 0.9],   # new-class semantic
            [0.9, 1.0, 1.1],   # new-class nonsemantic
            [1.0, 1.0, 1.2],   # new-class nonsemantic
        ]
    )
    labels = np.array([0, 1, 2, 0, 1, 2, 3, 3, 3, 3])
    tags = np.array(
        [ShiftTag.IID.value] * 6
        + [ShiftTag.NEWCLASS_SEMANTIC.value] * 2
        + [ShiftTag.NEWCLASS_NONSEMANTIC.value] * 2,
        dtype="U24",
    )
    return simple_bundle(logits, labels, tags)
