"""Fixed-length (train, test) day splits."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import SpanTooShort


@dataclass(frozen=True)
class FoldPlan:
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    tuning_pair_index: int = 0

    @property
    def test_pairs(self) -> list[int]:
        return [i for i in range(len(self.pairs)) if i != self.tuning_pair_index]

    def to_dict(self) -> dict:
        return {
            "tuning_pair_index": self.tuning_pair_index,
            "pairs": [{"train": tr.tolist(), "test": te.tolist()} for tr, te in self.pairs],
        }

    def export_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def make_folds(span_days: int, n_pairs: int = 11, test_days: int = 15, tuning_pair_index: int = 0) -> FoldPlan:
    """Contiguous test windows at evenly spaced offsets; training days are the complement.

    Offsets are ``round(i * (span - test) / (n_pairs - 1))``, so windows may
    overlap when ``n_pairs * test_days > span_days``.
    """
    if span_days <= test_days:
        raise SpanTooShort(f"span of {span_days} days cannot hold a {test_days}-day test window plus training days")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    room = span_days - test_days
    if n_pairs == 1:
        offsets = [0]
    else:
        offsets = [int(np.floor(i * room / (n_pairs - 1) + 0.5)) for i in range(n_pairs)]
    all_days = np.arange(span_days)
    pairs = []
    for off in offsets:
        test = all_days[off : off + test_days]
        train = np.setdiff1d(all_days, test)
        pairs.append((train, test))
    return FoldPlan(tuple(pairs), tuning_pair_index)
