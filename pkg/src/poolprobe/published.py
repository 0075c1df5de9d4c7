"""Lookup of published reference results bundled as package data.

Keys are (dataset, encoder size, pooling method) with an optional encoder
layer; layered entries also carry macro F1. Values are percentages as
printed in the originating study's result tables.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

DATASETS = ("shemo", "iemocap")
ENCODER_SIZES = ("tiny", "small")


@dataclass(frozen=True)
class PublishedResult:
    wa: float
    wa_std: float
    ua: float
    ua_std: float
    f1: float | None = None
    f1_std: float | None = None


def _read_data_csv(name: str) -> list[dict[str, str]]:
    text = resources.files("poolprobe").joinpath(f"data/{name}").read_text()
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return list(csv.DictReader(lines))


@lru_cache(maxsize=1)
def _reference_table() -> dict[tuple, PublishedResult]:
    table: dict[tuple, PublishedResult] = {}
    for row in _read_data_csv("reference_results.csv"):
        layer = int(row["layer"]) if row["layer"] else None
        key = (row["dataset"], row["encoder_size"], row["pooling"], layer)
        table[key] = PublishedResult(
            wa=float(row["wa_mean"]),
            wa_std=float(row["wa_std"]),
            ua=float(row["ua_mean"]),
            ua_std=float(row["ua_std"]),
            f1=float(row["f1_mean"]) if row["f1_mean"] else None,
            f1_std=float(row["f1_std"]) if row["f1_std"] else None,
        )
    return table


@lru_cache(maxsize=1)
def _baseline_table() -> dict[tuple, tuple[float, float]]:
    return {
        (row["dataset"], row["system"]): (float(row["wa"]), float(row["ua"]))
        for row in _read_data_csv("baseline_results.csv")
    }


def published_reference(
    dataset: str, model_size: str, pooling: str, layer: int | None = None
) -> PublishedResult:
    """Published mean/std values for a configuration, for report columns."""
    key = (dataset.lower(), model_size.lower(), pooling.lower(), layer)
    try:
        return _reference_table()[key]
    except KeyError:
        raise KeyError(f"no published reference for {key}") from None


def external_baseline(dataset: str, system: str) -> tuple[float, float]:
    """Published (WA, UA) of a competing system on the same benchmark."""
    key = (dataset.lower(), system.lower())
    try:
        return _baseline_table()[key]
    except KeyError:
        raise KeyError(f"no published baseline for {key}") from None
