"""Bundled synthetic microdata in the ACS-excerpt shape.

The real SDNist/IPUMS excerpts cannot be redistributed, so experiments run
on rows sampled from a fixed categorical product distribution with the
same columns (RACE, SEX, OWNERSHP, AGE, INCTOT).  Income is correlated
with ownership, age bracket, and race so that privatization has signal to
destroy.  AGE and INCTOT are written as raw numbers and discretized at
load time exactly like the real files.
"""

from __future__ import annotations

import csv
import io
import math
import tempfile
from pathlib import Path

from .rng import RngHandle
from .tabular import Dataset, Schema, load_csv

COLUMNS = ("RACE", "SEX", "OWNERSHP", "AGE", "INCTOT")

# Heavily skewed race mix: two large groups plus seven small ones.  The
# small-group cell counts stay near zero while large-group cells sit well
# above typical suppression thresholds, which keeps the count spectrum
# away from the threshold boundary where suppression decisions are coin
# flips.
RACE_PROBS = (0.65, 0.33, *(0.02 / 7,) * 7)
SEX_PROBS = (0.49, 0.51)
OWNERSHP_PROBS = (0.36, 0.64)
AGE_RANGE = (18, 90)  # uniform integer ages, binned into 5 brackets at load

# income model: Pr[> $50k] = sigmoid(own + age bracket + race effects)
OWNERSHP_EFFECT = (-0.22, 0.22)
AGE_EFFECT = (-0.18, -0.09, 0.0, 0.09, 0.18)
RACE_EFFECT = (0.20, -0.20, 0.20, -0.20, 0.20, -0.20, 0.20, -0.20, 0.20)

DEFAULT_ROWS = 4400


def acs_like_schema() -> Schema:
    """Schema of the loaded (post-binning) data; RACE is the quasi-identifier."""
    return Schema(
        (
            ("RACE", tuple(str(i) for i in range(1, 10))),
            ("SEX", ("1", "2")),
            ("OWNERSHP", ("0", "1")),
            ("AGE", tuple(str(i) for i in range(5))),
            ("INCTOT", ("0", "1")),
        ),
        quasi_identifiers=("RACE",),
    )


def generate_raw_rows(rows: int, seed: int) -> list[tuple[str, str, str, str, str]]:
    """Raw CSV rows (strings), numeric AGE and INCTOT, deterministic per seed."""
    gen = RngHandle(seed, (9,)).gen
    lo, hi = AGE_RANGE
    bracket_width = (hi - lo) / 5.0
    out = []
    for _ in range(rows):
        race = int(gen.choice(9, p=RACE_PROBS))
        sex = int(gen.choice(2, p=SEX_PROBS))
        own = int(gen.choice(2, p=OWNERSHP_PROBS))
        age = int(gen.integers(lo, hi))
        bracket = min(4, int((age - lo) / bracket_width))
        logit = OWNERSHP_EFFECT[own] + AGE_EFFECT[bracket] + RACE_EFFECT[race]
        rich = gen.random() < 1.0 / (1.0 + math.exp(-logit))
        if rich:
            income = int(gen.integers(50_001, 250_001))
        else:
            income = int(gen.integers(1_000, 50_001))
        out.append((str(race + 1), str(sex + 1), str(own), str(age), str(income)))
    return out


def write_synthetic_csv(path, rows: int, seed: int) -> None:
    data = generate_raw_rows(rows, seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        writer.writerows(data)


def synthetic_dataset(rows: int = DEFAULT_ROWS, seed: int = 7) -> Dataset:
    """Generate, serialize, and re-load through the standard CSV path."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(COLUMNS)
    writer.writerows(generate_raw_rows(rows, seed))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "synthetic.csv"
        path.write_text(buffer.getvalue(), encoding="utf-8")
        return load_csv(path, acs_like_schema(), binning=None)
