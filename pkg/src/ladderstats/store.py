"""Append-only per-format match logs with hash-verified snapshots.

Layout under the data directory::

    <format>/matches.log     one match per line (core line format), fsync'd per append
    <format>/snapshot.json   online rater state after the first N log lines

A snapshot records the SHA-256 of the log prefix it summarizes.  Recovery
trusts a snapshot only when that hash matches; otherwise it replays the whole
log.  A torn trailing line (no newline, or unparsable) is truncated.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .core import MatchRecord, format_line, parse_line
from .online import EloConfig, GlickoConfig, OnlineRater

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
LOG_NAME = "matches.log"
SNAPSHOT_NAME = "snapshot.json"


class MatchLog:
    """Append-only line log for one format."""

    def __init__(self, path: str | Path, style: str = "json"):
        self.path = Path(path)
        self.style = style
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)

    def read(self) -> tuple[list[MatchRecord], list[bytes]]:
        """Parse the log, truncating a torn final line; returns records and raw lines."""
        data = self.path.read_bytes()
        lines = data.split(b"\n")
        tail = lines.pop()  # bytes after the last newline
        records: list[MatchRecord] = []
        raw: list[bytes] = []
        good_len = 0
        for k, line in enumerate(lines):
            try:
                parsed = parse_line(line.decode("utf-8"))
                rec = None if parsed is None else MatchRecord.from_dict(parsed)
            except (ValueError, UnicodeDecodeError) as exc:
                if k == len(lines) - 1 and not tail:
                    logger.warning("%s: dropping unparsable final line (%s)", self.path, exc)
                    tail = line + b"\n"
                    break
                raise ValueError(f"{self.path}: line {k + 1} is corrupt: {exc}") from None
            good_len += len(line) + 1
            if rec is not None:
                records.append(rec)
                raw.append(line)
        if tail:
            logger.warning("%s: truncating torn final line (%d bytes)", self.path, len(tail))
            with open(self.path, "r+b") as fh:
                fh.truncate(good_len)
                fh.flush()
                os.fsync(fh.fileno())
        return records, raw

    def append(self, match: MatchRecord) -> bytes:
        line = format_line(match, self.style).encode("utf-8")
        with open(self.path, "ab") as fh:
            fh.write(line + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        return line


def prefix_hash(lines: list[bytes], n: int | None = None) -> str:
    h = hashlib.sha256()
    for line in lines[: len(lines) if n is None else n]:
        h.update(line)
        h.update(b"\n")
    return h.hexdigest()


@dataclass(frozen=True)
class LedgerSnapshot:
    format: str
    match_count: int
    log_hash: str
    rater: dict

    def payload(self) -> dict:
        return {"version": SNAPSHOT_VERSION, "format": self.format, "match_count": self.match_count,
                "log_hash": self.log_hash, "rater": self.rater}


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def write_snapshot(path: str | Path, snap: LedgerSnapshot) -> None:
    """Write-temp-then-rename so a crash never leaves a half-written snapshot in place."""
    path = Path(path)
    payload = snap.payload()
    doc = {"checksum": _checksum(payload), **payload}
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_snapshot(path: str | Path) -> LedgerSnapshot | None:
    path = Path(path)
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        checksum = doc.pop("checksum")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {doc.get('version')!r}")
        if _checksum(doc) != checksum:
            raise ValueError("checksum mismatch")
        return LedgerSnapshot(doc["format"], int(doc["match_count"]), doc["log_hash"], doc["rater"])
    except (ValueError, KeyError, TypeError) as exc:
        logger.warning("%s: ignoring unusable snapshot (%s)", path, exc)
        return None


@dataclass
class Recovered:
    matches: list[MatchRecord]  # sorted by (timestamp, id)
    lines: list[bytes]  # log order
    rater: OnlineRater
    from_snapshot: int  # log lines covered by the snapshot used (0 = full replay)


def snapshot_state(fmt: str, rater: OnlineRater, lines: list[bytes]) -> LedgerSnapshot:
    return LedgerSnapshot(fmt, rater.count, prefix_hash(lines, rater.count), rater.to_dict())


def recover(fmt_dir: str | Path, elo: EloConfig = EloConfig(), glicko: GlickoConfig = GlickoConfig(),
            tie_value: float = 0.5, use_snapshot: bool = True) -> Recovered:
    """Rebuild a format's state: latest valid snapshot plus replay of the log suffix.

    Ratings are a fold over the accepted matches in (timestamp, id) order, while
    the log is in arrival order.  A snapshot is therefore only usable when every
    later log record sorts after everything it covers.
    """
    fmt_dir = Path(fmt_dir)
    log = MatchLog(fmt_dir / LOG_NAME)
    arrived, lines = log.read()
    rater = OnlineRater(elo, glicko, tie_value)
    start = 0
    snap = load_snapshot(fmt_dir / SNAPSHOT_NAME) if use_snapshot else None
    if snap is not None:
        n = snap.match_count
        ok = n <= len(lines) and prefix_hash(lines, n) == snap.log_hash
        if ok and 0 < n < len(arrived):
            ok = max(m.sort_key for m in arrived[:n]) <= min(m.sort_key for m in arrived[n:])
        if ok:
            rater.load_dict(snap.rater)
            start = n
        else:
            logger.warning("%s: snapshot does not match the log prefix; replaying from scratch", fmt_dir)
    head = sorted(arrived[:start], key=lambda m: m.sort_key)
    tail = sorted(arrived[start:], key=lambda m: m.sort_key)
    for m in tail:
        rater.apply(m)
    return Recovered(head + tail, lines, rater, start)
