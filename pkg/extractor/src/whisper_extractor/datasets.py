"""Dataset label rules and manifest emission.

Three dataset kinds are supported:

* ``shemo`` — labels parsed from standard ShEMO file names
  (gender letter + two-digit speaker + emotion letter + index, e.g.
  ``M01A23``). Fear is dropped; the remaining five classes are kept.
  Speakers are sorted and assigned round-robin to 10 speaker groups, and
  the group is the fold.
* ``iemocap`` — labels from a CSV table (``file,emotion,session,scenario``).
  Only improvised utterances are kept; ``excited`` merges into
  ``happiness``; frustration/surprise/fear/disgust/other/xxx are excluded;
  sessions 1-5 map to folds 0-4.
* ``generic`` — labels and folds straight from a CSV table
  (``file,label,fold[,group]``).

Unknown label strings are an error listing every offender.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

SHEMO_LETTERS = {
    "A": "anger",
    "H": "happiness",
    "N": "neutral",
    "S": "sadness",
    "W": "surprise",
    "F": "fear",
}
SHEMO_DROPPED = "fear"
SHEMO_CLASSES = ["anger", "happiness", "neutral", "sadness", "surprise"]
SHEMO_GROUPS = 10
_SHEMO_NAME = re.compile(r"^([MF]\d{2})([A-Z])\d+$")

IEMOCAP_CLASSES = ["anger", "happiness", "sadness", "neutral"]
IEMOCAP_LABEL_MAP = {
    "ang": "anger",
    "anger": "anger",
    "hap": "happiness",
    "happy": "happiness",
    "happiness": "happiness",
    "exc": "happiness",
    "excited": "happiness",
    "sad": "sadness",
    "sadness": "sadness",
    "neu": "neutral",
    "neutral": "neutral",
}
IEMOCAP_EXCLUDED = {
    "fru", "frustration", "sur", "surprise", "fea", "fear",
    "dis", "disgust", "oth", "other", "xxx",
}
IEMOCAP_SESSIONS = 5

_IMPROVISED = {"improvised", "impro", "improv"}
_SCRIPTED = {"scripted", "script"}


@dataclass
class LabeledUtterance:
    utterance_id: str
    file: str          # audio path relative to the dataset root
    label: int
    group: int
    fold: int


def shemo_labels(files: list[str]) -> tuple[list[str], list[LabeledUtterance]]:
    """Derive labels and speaker-group folds from ShEMO file names."""
    offenders = []
    parsed = []
    for file in files:
        stem = Path(file).stem
        match = _SHEMO_NAME.match(stem)
        letter = match.group(2) if match else None
        if letter not in SHEMO_LETTERS:
            offenders.append(file)
            continue
        parsed.append((file, stem, match.group(1), SHEMO_LETTERS[letter]))
    if offenders:
        raise ValueError(f"unrecognized ShEMO file names: {sorted(offenders)}")
    speakers = sorted({speaker for _, _, speaker, _ in parsed})
    group_of = {speaker: i % SHEMO_GROUPS for i, speaker in enumerate(speakers)}
    records = []
    for file, stem, speaker, class_name in parsed:
        if class_name == SHEMO_DROPPED:
            continue
        group = group_of[speaker]
        records.append(
            LabeledUtterance(stem, file, SHEMO_CLASSES.index(class_name), group, group)
        )
    return SHEMO_CLASSES, records


def _read_table(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return [
            {k.strip(): (v or "").strip() for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def iemocap_labels(table_path) -> tuple[list[str], list[LabeledUtterance]]:
    """Apply the improvised-only, excited-into-happiness label rules."""
    records = []
    offenders = []
    for row in _read_table(table_path):
        scenario = row["scenario"].lower()
        if scenario in _SCRIPTED:
            continue
        if scenario not in _IMPROVISED:
            raise ValueError(f"{row['file']}: unknown scenario {row['scenario']!r}")
        emotion = row["emotion"].lower()
        if emotion in IEMOCAP_EXCLUDED:
            continue
        if emotion not in IEMOCAP_LABEL_MAP:
            offenders.append(row["emotion"])
            continue
        session = int(row["session"])
        if not 1 <= session <= IEMOCAP_SESSIONS:
            raise ValueError(f"{row['file']}: session {session} outside [1, {IEMOCAP_SESSIONS}]")
        records.append(
            LabeledUtterance(
                Path(row["file"]).stem,
                row["file"],
                IEMOCAP_CLASSES.index(IEMOCAP_LABEL_MAP[emotion]),
                session,
                session - 1,
            )
        )
    if offenders:
        raise ValueError(f"unknown emotion labels: {sorted(set(offenders))}")
    return IEMOCAP_CLASSES, records


def generic_labels(table_path) -> tuple[list[str], list[LabeledUtterance]]:
    """Labels and folds straight from a user-supplied table."""
    rows = _read_table(table_path)
    classes = sorted({row["label"] for row in rows})
    records = []
    for row in rows:
        fold = int(row["fold"])
        group = int(row.get("group") or fold)
        records.append(
            LabeledUtterance(
                Path(row["file"]).stem, row["file"], classes.index(row["label"]), group, fold
            )
        )
    return classes, records


def write_manifest(
    path,
    class_names: list[str],
    fold_count: int,
    width: int,
    layers: list[int],
    records: list[tuple[LabeledUtterance, dict[int, str]]],
) -> None:
    """Emit a manifest in the engine's text format (paths relative to it)."""
    lines = [
        f"classes: {','.join(class_names)}",
        f"folds: {fold_count}",
        f"width: {width}",
        f"layers: {','.join(str(l) for l in layers)}",
        "",
    ]
    for utt, feature_paths in records:
        paths = ";".join(f"{layer}={rel}" for layer, rel in sorted(feature_paths.items()))
        lines.append(f"{utt.utterance_id}|{utt.label}|{utt.group}|{utt.fold}|{paths}")
    Path(path).write_text("\n".join(lines) + "\n")
