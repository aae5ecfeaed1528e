"""CSV / JSON ingestion and emission.

Series CSV format: header ``entity_id,date,frequency``, ISO-8601 dates,
decimal frequencies. Group files are JSON objects
``{"name": ..., "members": [...]}``. Emission mirrors ingestion so every
emitted file re-ingests losslessly.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .series import FrequencySeries, GroupDefinition

SERIES_HEADER = ["entity_id", "date", "frequency"]


def load_series_csv(path) -> dict[str, FrequencySeries]:
    """Read a series CSV into per-entity FrequencySeries.

    All entities are aligned to the global [min date, max date] range of
    the file, with missing days filled as zero references. Row numbers in
    errors count the header as row 1.
    """
    per_entity: dict[str, dict[dt.date, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SERIES_HEADER:
            raise IngestionError(
                f"expected header {','.join(SERIES_HEADER)!r}, got {header}", row=1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestionError(f"expected 3 fields, got {len(row)}", row=row_no)
            entity_id, date_str, freq_str = row
            if not entity_id:
                raise IngestionError("empty entity_id", row=row_no)
            try:
                day = dt.date.fromisoformat(date_str)
            except ValueError:
                raise IngestionError(f"bad date {date_str!r}", row=row_no) from None
            try:
                freq = float(freq_str)
            except ValueError:
                raise IngestionError(f"bad frequency {freq_str!r}", row=row_no) from None
            if not np.isfinite(freq) or freq < 0:
                raise IngestionError(
                    f"negative or non-finite frequency {freq_str} "
                    f"for '{entity_id}'", row=row_no)
            days = per_entity.setdefault(entity_id, {})
            if day in days:
                raise IngestionError(
                    f"duplicate date {date_str} for '{entity_id}'", row=row_no)
            days[day] = freq
    if not per_entity:
        raise IngestionError("no data rows", row=1)

    first = min(min(d) for d in per_entity.values())
    last = max(max(d) for d in per_entity.values())
    span = (last - first).days + 1
    out = {}
    for entity_id, days in per_entity.items():
        values = np.zeros(span)
        for day, freq in days.items():
            values[(day - first).days] = freq
        out[entity_id] = FrequencySeries(entity_id, first, values)
    return out


def write_series_csv(path, series_map: dict[str, FrequencySeries]) -> None:
    """Emit series in ingestion format; float text round-trips bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_HEADER)
        for entity_id in sorted(series_map):
            s = series_map[entity_id]
            for i, v in enumerate(s.values):
                writer.writerow([entity_id, s.date_at(i).isoformat(), repr(float(v))])


def load_group_json(path) -> GroupDefinition:
    with open(path) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "name" not in obj or "members" not in obj:
        raise IngestionError(f"group file {path} must hold a name and a member list")
    return GroupDefinition(str(obj["name"]), frozenset(str(m) for m in obj["members"]))


def write_group_json(path, group: GroupDefinition) -> None:
    dump_json(path, {"name": group.name, "members": group.sorted_members()})


def dump_json(path, obj) -> None:
    """Deterministic JSON emission: sorted keys, fixed layout, no timestamps."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
