"""Match-log data model: records, rating snapshots, ingestion and head-to-head tallies.

Match log lines come in two interchangeable encodings, one record per line:

* delimited row: ``id,ts,format,a,b,result`` (CSV quoting rules, optional header)
* flat object:   ``{"id":...,"ts":...,"format":...,"a":...,"b":...,"result":...}``

``result`` is one of ``a``, ``b`` or ``tie``; ``ts`` is RFC 3339 in UTC
(``2025-10-27T14:03:00Z``).  Canonical lines round-trip byte for byte through
:func:`parse_line` / :func:`format_line`.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

logger = logging.getLogger(__name__)

AgentId = str

FIELDS = ("id", "ts", "format", "a", "b", "result")
HEADER = ",".join(FIELDS)


class Result(str, Enum):
    A_WINS = "a"
    B_WINS = "b"
    TIE = "tie"


class IngestError(ValueError):
    """One or more records failed validation."""

    def __init__(self, rejections: Sequence["Rejection"]):
        self.rejections = list(rejections)
        lines = "; ".join(str(r) for r in self.rejections[:10])
        more = f" (+{len(self.rejections) - 10} more)" if len(self.rejections) > 10 else ""
        super().__init__(f"{len(self.rejections)} malformed record(s): {lines}{more}")


class ConflictError(ValueError):
    """Two records share an id but disagree on the payload."""


@dataclass(frozen=True)
class Rejection:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def parse_timestamp(text: str) -> datetime:
    if not isinstance(text, str) or not text:
        raise ValueError("timestamp must be a non-empty string")
    raw = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class MatchRecord:
    """One decided game between two agents."""

    id: str
    timestamp: datetime
    format: str
    a: AgentId
    b: AgentId
    result: Result

    def __post_init__(self):
        if not self.id:
            raise ValueError("match id must be non-empty")
        if not self.format:
            raise ValueError("format must be non-empty")
        if not self.a or not self.b:
            raise ValueError("agent ids must be non-empty")
        if self.a == self.b:
            raise ValueError(f"agent {self.a!r} cannot play itself")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")
        if not isinstance(self.result, Result):
            object.__setattr__(self, "result", Result(self.result))

    @property
    def sort_key(self) -> tuple[datetime, str]:
        return (self.timestamp, self.id)

    def score_a(self, tie_value: float = 0.5) -> float:
        if self.result is Result.A_WINS:
            return 1.0
        if self.result is Result.B_WINS:
            return 0.0
        return tie_value

    def score_for(self, agent: AgentId, tie_value: float = 0.5) -> float:
        if agent == self.a:
            return self.score_a(tie_value)
        if agent == self.b:
            return 1.0 - self.score_a(1.0 - tie_value)
        raise KeyError(agent)

    def opponent(self, agent: AgentId) -> AgentId:
        if agent == self.a:
            return self.b
        if agent == self.b:
            return self.a
        raise KeyError(agent)

    @property
    def winner(self) -> AgentId | None:
        if self.result is Result.A_WINS:
            return self.a
        if self.result is Result.B_WINS:
            return self.b
        return None

    def to_dict(self) -> dict[str, str]:
        return {
            "id": self.id,
            "ts": format_timestamp(self.timestamp),
            "format": self.format,
            "a": self.a,
            "b": self.b,
            "result": self.result.value,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> "MatchRecord":
        missing = [f for f in FIELDS if f not in raw or raw[f] is None or raw[f] == ""]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")
        for f in FIELDS:
            if not isinstance(raw[f], str):
                raise ValueError(f"field {f!r} must be a string")
        try:
            result = Result(raw["result"])
        except ValueError:
            raise ValueError(f"bad result token {raw['result']!r} (expected a, b or tie)") from None
        try:
            ts = parse_timestamp(raw["ts"])
        except ValueError as exc:
            raise ValueError(f"bad timestamp {raw['ts']!r}: {exc}") from None
        return cls(
            id=raw["id"],
            timestamp=ts,
            format=raw["format"],
            a=raw["a"],
            b=raw["b"],
            result=result,
        )


def format_line(match: MatchRecord, style: str = "csv") -> str:
    """Encode one record as a log line (without the newline)."""
    d = match.to_dict()
    if style == "json":
        return json.dumps(d, ensure_ascii=False, separators=(",", ":"))
    if style != "csv":
        raise ValueError(f"unknown line style {style!r}")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow([d[f] for f in FIELDS])
    return buf.getvalue()


def parse_line(line: str) -> dict[str, str] | None:
    """Decode one log line into a raw field dict; None for blank lines and headers."""
    text = line.rstrip("\r\n")
    if not text.strip():
        return None
    if text.lstrip().startswith("{"):
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("object line must decode to a mapping")
        return obj
    if text == HEADER:
        return None
    row = next(csv.reader([text]))
    if len(row) != len(FIELDS):
        raise ValueError(f"expected {len(FIELDS)} delimited fields, got {len(row)}")
    return dict(zip(FIELDS, row))


@dataclass(frozen=True)
class RatingState:
    """Per-agent snapshot for one metric."""

    rating: float
    deviation: float = 0.0
    games: int = 0
    wins: int = 0
    losses: int = 0
    ties: int = 0

    def __post_init__(self):
        if self.deviation < 0:
            raise ValueError("deviation must be non-negative")
        if min(self.games, self.wins, self.losses, self.ties) < 0:
            raise ValueError("counts must be non-negative")
        if self.games != self.wins + self.losses + self.ties:
            raise ValueError("games must equal wins + losses + ties")

    def with_results(self, scores: Iterable[float], rating: float | None = None,
                     deviation: float | None = None) -> "RatingState":
        wins, losses, ties = self.wins, self.losses, self.ties
        n = 0
        for s in scores:
            n += 1
            if s == 1.0:
                wins += 1
            elif s == 0.0:
                losses += 1
            else:
                ties += 1
        return RatingState(
            rating=self.rating if rating is None else rating,
            deviation=self.deviation if deviation is None else deviation,
            games=self.games + n,
            wins=wins,
            losses=losses,
            ties=ties,
        )

    def win_rate(self, tie_value: float = 0.5) -> float:
        if self.games == 0:
            return 0.0
        return (self.wins + tie_value * self.ties) / self.games


@dataclass(frozen=True)
class H2HCell:
    wins: int = 0
    losses: int = 0
    ties: int = 0

    @property
    def games(self) -> int:
        return self.wins + self.losses + self.ties

    @property
    def empty(self) -> bool:
        return self.games == 0

    def flipped(self) -> "H2HCell":
        return H2HCell(self.losses, self.wins, self.ties)


@dataclass(frozen=True)
class HeadToHead:
    """Row-vs-column win/loss/tie records among a set of agents."""

    agents: tuple[AgentId, ...]
    cells: Mapping[tuple[AgentId, AgentId], H2HCell] = field(default_factory=dict)

    def cell(self, row: AgentId, col: AgentId) -> H2HCell:
        if row not in self.agents or col not in self.agents:
            raise KeyError((row, col))
        return self.cells.get((row, col), H2HCell())

    def win_rate(self, row: AgentId, col: AgentId, tie_value: float = 0.5) -> float | None:
        c = self.cell(row, col)
        if c.empty:
            return None
        return (c.wins + tie_value * c.ties) / c.games

    def to_rows(self) -> list[dict[str, object]]:
        rows = []
        for i in self.agents:
            for j in self.agents:
                c = self.cell(i, j)
                if not c.empty:
                    rows.append({"row": i, "col": j, "wins": c.wins, "losses": c.losses, "ties": c.ties})
        return rows


def _coerce(raw: object) -> MatchRecord:
    if isinstance(raw, MatchRecord):
        return raw
    if isinstance(raw, str):
        parsed = parse_line(raw)
        if parsed is None:
            raise LookupError("blank")
        return MatchRecord.from_dict(parsed)
    if isinstance(raw, Mapping):
        return MatchRecord.from_dict(raw)
    raise ValueError(f"unsupported record type {type(raw).__name__}")


def ingest_report(source: Iterable[object]) -> tuple[list[MatchRecord], list[Rejection]]:
    """Validate, de-duplicate and sort records; return accepted records and rejections.

    Items may be MatchRecords, raw field mappings or log lines.  Line numbers
    in rejections are 1-based positions in ``source``.  A duplicate id with a
    different payload raises :class:`ConflictError` regardless of mode.
    """
    by_id: dict[str, MatchRecord] = {}
    first_line: dict[str, int] = {}
    rejected: list[Rejection] = []
    for lineno, raw in enumerate(source, start=1):
        try:
            rec = _coerce(raw)
        except LookupError:
            continue
        except (ValueError, TypeError) as exc:
            rejected.append(Rejection(lineno, str(exc)))
            continue
        prev = by_id.get(rec.id)
        if prev is None:
            by_id[rec.id] = rec
            first_line[rec.id] = lineno
        elif prev != rec:
            raise ConflictError(
                f"line {lineno}: match id {rec.id!r} conflicts with line {first_line[rec.id]}"
            )
    matches = sorted(by_id.values(), key=lambda m: m.sort_key)
    return matches, rejected


def ingest_matches(source: Iterable[object], strict: bool = True) -> list[MatchRecord]:
    """Return valid records sorted by (timestamp, id) with duplicate ids collapsed.

    With ``strict`` any malformed record raises :class:`IngestError` carrying
    every rejection; otherwise rejections are logged and skipped.
    """
    matches, rejected = ingest_report(source)
    if rejected:
        if strict:
            raise IngestError(rejected)
        for r in rejected:
            logger.warning("rejected %s", r)
    return matches


def read_match_log(path: str | Path, strict: bool = True) -> list[MatchRecord]:
    with open(path, encoding="utf-8") as fh:
        return ingest_matches(fh, strict=strict)


def write_match_log(matches: Iterable[MatchRecord], path: str | Path, style: str = "csv",
                    header: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header and style == "csv":
            fh.write(HEADER + "\n")
        for m in matches:
            fh.write(format_line(m, style) + "\n")


def agents_of(matches: Iterable[MatchRecord]) -> list[AgentId]:
    """Agents in order of first appearance."""
    seen: dict[AgentId, None] = {}
    for m in matches:
        seen.setdefault(m.a)
        seen.setdefault(m.b)
    return list(seen)


def split_formats(matches: Iterable[MatchRecord]) -> dict[str, list[MatchRecord]]:
    out: dict[str, list[MatchRecord]] = {}
    for m in matches:
        out.setdefault(m.format, []).append(m)
    return out


def head_to_head(matches: Iterable[MatchRecord], agents: Iterable[AgentId]) -> HeadToHead:
    agent_list = tuple(dict.fromkeys(agents))
    if not agent_list:
        raise ValueError("agents must be non-empty")
    members = set(agent_list)
    tally: dict[tuple[AgentId, AgentId], list[int]] = {}
    for m in matches:
        if m.a not in members or m.b not in members:
            continue
        ab = tally.setdefault((m.a, m.b), [0, 0, 0])
        ba = tally.setdefault((m.b, m.a), [0, 0, 0])
        if m.result is Result.A_WINS:
            ab[0] += 1
            ba[1] += 1
        elif m.result is Result.B_WINS:
            ab[1] += 1
            ba[0] += 1
        else:
            ab[2] += 1
            ba[2] += 1
    cells = {k: H2HCell(*v) for k, v in tally.items()}
    return HeadToHead(agent_list, cells)
