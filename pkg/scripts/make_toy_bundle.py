#!/usr/bin/env python3
"""Regenerate the checked-in toy bundle (4 samples, 3 classes).

The fixture exercises every optional bundle part: an MCD stack (2 passes),
2-d features, and one external score column. Rows 2 and 3 are misclassified.
"""

from pathlib import Path

import numpy as np

from fdeval import PredictionBundle, ShiftTag, validate_bundle, write_bundle

logits = np.array(
    [
        [2.0, 0.0, -1.0],
        [0.5, 1.5, 0.0],
        [1.0, 2.0, 0.0],
        [0.2, 0.1, 0.0],
    ]
)
labels = np.array([0, 1, 0, 1])
shift = np.full(4, ShiftTag.IID.value, dtype="U24")
mcd = np.stack([logits + 0.1, logits - 0.1], axis=1)
features = np.array([[0.0, 0.2], [3.0, 3.1], [0.3, -0.1], [2.8, 3.0]])
external = {"demo": np.array([0.9, 0.8, 0.3, 0.4])}

bundle = validate_bundle(
    PredictionBundle(
        logits=logits,
        labels=labels,
        shift_tags=shift,
        mcd_logits=mcd,
        features=features,
        externals=external,
    )
)

out = Path(__file__).resolve().parent.parent / "data" / "toy_bundle"
write_bundle(bundle, out)
print(f"wrote {out}")
