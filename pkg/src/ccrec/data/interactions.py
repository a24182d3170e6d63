"""Raw log ingestion into canonical ``Interaction`` rows."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from ..errors import DataError

log = logging.getLogger(__name__)

SOURCE_KINDS = ("canonical", "retailrocket", "tmall")


@dataclass(frozen=True)
class Interaction:
    user_id: str
    item_id: str
    category_id: str
    timestamp: int

    def __post_init__(self):
        if self.timestamp < 0:
            raise DataError(f"negative timestamp {self.timestamp}")

    def to_tsv(self):
        return f"{self.user_id}\t{self.item_id}\t{self.category_id}\t{self.timestamp}"


def sort_key(x: Interaction):
    return (x.user_id, x.timestamp, x.category_id, x.item_id)


def _open_rows(path):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return fh


def _read_canonical(paths, stats):
    out = []
    for path in paths:
        with _open_rows(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n").rstrip("\r")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    stats["malformed"] += 1
                    log.warning("%s:%d: expected 4 columns, got %d", path, lineno, len(parts))
                    continue
                user, item, cat, ts = parts
                if not cat:
                    stats["missing_category"] += 1
                    continue
                try:
                    t = int(ts)
                    if t < 0 or not user or not item:
                        raise ValueError(ts)
                except ValueError:
                    stats["malformed"] += 1
                    log.warning("%s:%d: bad row %r", path, lineno, line)
                    continue
                out.append(Interaction(user, item, cat, t))
    return out


def _retailrocket_categories(path, stats, latest):
    """Fold one property file into ``latest`` (item -> (timestamp, category))."""
    with _open_rows(path) as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            if row.get("property") != "categoryid":
                continue
            try:
                ts = int(row["timestamp"])
                item = row["itemid"].strip()
                value = row["value"].strip()
            except (KeyError, ValueError, AttributeError):
                stats["malformed"] += 1
                log.warning("%s:%d: bad property row", path, lineno)
                continue
            if not item or not value:
                stats["malformed"] += 1
                continue
            prev = latest.get(item)
            # ties on timestamp keep the later row in file order
            if prev is None or ts >= prev[0]:
                latest[item] = (ts, value)


def _read_retailrocket(paths, stats, event_types=None):
    event_files, prop_files = [], []
    for path in paths:
        with _open_rows(path) as fh:
            header = fh.readline().strip().split(",")
        if "visitorid" in header:
            event_files.append(path)
        elif "property" in header:
            prop_files.append(path)
        else:
            raise DataError(f"{path}: not a RetailRocket events or item-properties file")
    if not event_files or not prop_files:
        raise DataError("RetailRocket ingest needs an events file and an item-properties file")
    latest = {}
    for path in prop_files:
        _retailrocket_categories(path, stats, latest)
    cat_of = {item: v for item, (_, v) in latest.items()}
    out = []
    for path in event_files:
        with _open_rows(path) as fh:
            for lineno, row in enumerate(csv.DictReader(fh), 2):
                try:
                    ts = int(row["timestamp"]) // 1000
                    user = row["visitorid"].strip()
                    item = row["itemid"].strip()
                    event = row["event"].strip()
                    if ts < 0 or not user or not item:
                        raise ValueError
                except (KeyError, ValueError, AttributeError):
                    stats["malformed"] += 1
                    log.warning("%s:%d: bad event row", path, lineno)
                    continue
                if event_types and event not in event_types:
                    stats["filtered_event"] += 1
                    continue
                cat = cat_of.get(item)
                if cat is None:
                    stats["missing_category"] += 1
                    continue
                out.append(Interaction(user, item, cat, ts))
    return out


def _tmall_time(value, time_format, year):
    if time_format == "unix":
        return int(value)
    value = value.strip().zfill(4)
    dt = datetime(year, int(value[:2]), int(value[2:]), tzinfo=timezone.utc)
    return int(dt.timestamp())


def _read_tmall(paths, stats, columns=None, time_format="mmdd", year=2014):
    cols = {"user": "user_id", "item": "item_id", "category": "cat_id", "time": "time_stamp"}
    cols.update(columns or {})
    out = []
    for path in paths:
        with _open_rows(path) as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in cols.values() if c not in (reader.fieldnames or [])]
            if missing:
                raise DataError(f"{path}: missing columns {missing}")
            for lineno, row in enumerate(reader, 2):
                cat = (row[cols["category"]] or "").strip()
                if not cat:
                    stats["missing_category"] += 1
                    continue
                try:
                    ts = _tmall_time(row[cols["time"]], time_format, year)
                    user = row[cols["user"]].strip()
                    item = row[cols["item"]].strip()
                    if not user or not item:
                        raise ValueError
                except (ValueError, AttributeError):
                    stats["malformed"] += 1
                    log.warning("%s:%d: bad row", path, lineno)
                    continue
                out.append(Interaction(user, item, cat, ts))
    return out


def ingest_raw(source_kind, paths, **options):
    """Parse raw files into Interactions sorted by (user, timestamp).

    Returns ``(interactions, stats)`` where ``stats`` counts skipped rows by
    reason (``malformed``, ``missing_category``, ``filtered_event``).
    """
    stats = Counter()
    paths = [Path(p) for p in paths]
    if source_kind == "canonical":
        rows = _read_canonical(paths, stats)
    elif source_kind == "retailrocket":
        rows = _read_retailrocket(paths, stats, options.get("event_types"))
    elif source_kind == "tmall":
        rows = _read_tmall(paths, stats, options.get("columns"),
                           options.get("time_format", "mmdd"), options.get("year", 2014))
    else:
        raise DataError(f"unknown source kind {source_kind!r}; expected one of {SOURCE_KINDS}")
    rows.sort(key=sort_key)
    stats["kept"] = len(rows)
    return rows, stats


def write_canonical(path, interactions):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x in interactions:
            fh.write(x.to_tsv() + "\n")
