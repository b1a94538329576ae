"""Live leaderboard service: append-only ingestion, synchronous online ratings, background FH-BT refits.

Each format ladder has a single writer (a lock serializes acceptance).  Reads
are served from an immutable :class:`LadderView` that is swapped in whole
after every write or completed refit, so a reader never sees a half-applied
update and never waits on a refit.
"""

from __future__ import annotations

import bisect
import json
import logging
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .btfit import BTFit
from .core import ConflictError, MatchRecord, head_to_head
from .leaderboard import (PRIMARY_METRICS, LeaderboardConfig, LeaderboardEntry, assemble_entries,
                          fit_fhbt, sort_entries)
from .online import OnlineRater, replay_ladder
from .store import LOG_NAME, SNAPSHOT_NAME, MatchLog, recover, snapshot_state, write_snapshot

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8000
    leaderboard: LeaderboardConfig = field(default_factory=lambda: LeaderboardConfig(bootstrap_replicates=200))
    format_configs: dict[str, LeaderboardConfig] = field(default_factory=dict)
    formats: tuple[str, ...] | None = None  # None accepts any format label
    refit_every: int = 100
    snapshot_every: int = 250
    background_refit: bool = True

    def __post_init__(self):
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if self.refit_every < 1:
            raise ValueError("refit_every must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")

    def config_for(self, fmt: str) -> LeaderboardConfig:
        return self.format_configs.get(fmt, self.leaderboard)

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceConfig":
        d = dict(d)
        if "leaderboard" in d:
            d["leaderboard"] = LeaderboardConfig.from_dict(d["leaderboard"])
        if "format_configs" in d:
            d["format_configs"] = {k: LeaderboardConfig.from_dict(v) for k, v in d["format_configs"].items()}
        if d.get("formats") is not None:
            d["formats"] = tuple(d["formats"])
        return cls(**d)


@dataclass(frozen=True)
class LadderView:
    match_count: int
    fhbt_match_count: int
    entries: tuple[LeaderboardEntry, ...]


class UnknownFormat(KeyError):
    pass


class FormatLadder:
    def __init__(self, fmt: str, directory: Path, config: LeaderboardConfig, refit_every: int,
                 snapshot_every: int, executor: ThreadPoolExecutor | None):
        self.format = fmt
        self.dir = directory
        self.config = config
        self.refit_every = refit_every
        self.snapshot_every = snapshot_every
        self.executor = executor
        self.lock = threading.RLock()
        self.log = MatchLog(directory / LOG_NAME)
        rec = recover(directory, config.elo, config.glicko, config.tie_value)
        self.matches: list[MatchRecord] = rec.matches
        self.lines = rec.lines
        self.ids = {m.id: m for m in self.matches}
        self.rater: OnlineRater = rec.rater
        self.fit: BTFit | None = None
        self.fit_count = 0
        self.pending: set[Future] = set()
        boundary = self._boundary(len(self.matches))
        if boundary:
            self.fit = fit_fhbt(self.matches[:boundary], config)
            self.fit_count = boundary
        self.view = self._make_view()

    def _boundary(self, n: int) -> int:
        return n - n % self.refit_every

    def _make_view(self) -> LadderView:
        entries = assemble_entries(self.rater, self.fit, self.config)
        return LadderView(self.rater.count, self.fit_count, tuple(entries))

    def submit(self, match: MatchRecord) -> bool:
        """Append and apply ``match``; False when it is an exact duplicate."""
        with self.lock:
            prev = self.ids.get(match.id)
            if prev is not None:
                if prev == match:
                    return False
                raise ConflictError(f"match id {match.id!r} already recorded with a different payload")
            self.lines.append(self.log.append(match))
            self.ids[match.id] = match
            if not self.matches or match.sort_key >= self.matches[-1].sort_key:
                self.matches.append(match)
                self.rater.apply(match)
            else:
                bisect.insort(self.matches, match, key=lambda m: m.sort_key)
                self.rater = OnlineRater(self.config.elo, self.config.glicko, self.config.tie_value)
                for m in self.matches:
                    self.rater.apply(m)
            n = len(self.matches)
            if n % self.snapshot_every == 0:
                write_snapshot(self.dir / SNAPSHOT_NAME, snapshot_state(self.format, self.rater, self.lines))
            if n % self.refit_every == 0:
                self._schedule_refit(n)
            self.view = self._make_view()
            return True

    def _schedule_refit(self, n: int) -> None:
        prefix = list(self.matches[:n])
        if self.executor is None:
            self._install_fit(n, fit_fhbt(prefix, self.config))
            return
        self.pending.add(self.executor.submit(self._refit_job, n, prefix))

    def _refit_job(self, n: int, prefix: list[MatchRecord]) -> None:
        try:
            fit = fit_fhbt(prefix, self.config)
        except Exception:
            logger.exception("%s: FH-BT refit at %d matches failed", self.format, n)
            return
        with self.lock:
            self._install_fit(n, fit)
            self.view = self._make_view()

    def _install_fit(self, n: int, fit: BTFit | None) -> None:
        if n >= self.fit_count:
            self.fit, self.fit_count = fit, n

    def snapshot(self) -> None:
        with self.lock:
            write_snapshot(self.dir / SNAPSHOT_NAME, snapshot_state(self.format, self.rater, self.lines))

    def refit_now(self) -> None:
        with self.lock:
            n = len(self.matches)
            self._install_fit(n, fit_fhbt(list(self.matches), self.config))
            self.view = self._make_view()


class LeaderboardService:
    def __init__(self, config: ServiceConfig):
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.executor = ThreadPoolExecutor(max_workers=1) if config.background_refit else None
        self.ladders: dict[str, FormatLadder] = {}
        self._lock = threading.Lock()
        for d in sorted(p for p in config.data_dir.iterdir() if (p / LOG_NAME).exists()):
            self._open(d.name)

    def _open(self, fmt: str) -> FormatLadder:
        ladder = FormatLadder(fmt, self.config.data_dir / fmt, self.config.config_for(fmt),
                              self.config.refit_every, self.config.snapshot_every, self.executor)
        self.ladders[fmt] = ladder
        return ladder

    def ladder(self, fmt: str, create: bool = False) -> FormatLadder:
        with self._lock:
            lad = self.ladders.get(fmt)
            if lad is None:
                if not create or (self.config.formats is not None and fmt not in self.config.formats):
                    raise UnknownFormat(fmt)
                if not fmt or "/" in fmt or fmt.startswith("."):
                    raise UnknownFormat(fmt)
                lad = self._open(fmt)
            return lad

    def submit(self, match: MatchRecord) -> bool:
        return self.ladder(match.format, create=True).submit(match)

    def leaderboard(self, fmt: str, metric: str | None = None) -> dict:
        lad = self.ladder(fmt)
        view = lad.view
        entries = view.entries if metric is None else sort_entries(view.entries, metric)
        return {
            "format": fmt,
            "metric": metric or lad.config.primary_metric,
            "match_count": view.match_count,
            "fhbt_match_count": view.fhbt_match_count,
            "entries": [e.to_dict() for e in entries],
        }

    def trajectory(self, fmt: str, agent: str) -> dict:
        lad = self.ladder(fmt)
        with lad.lock:
            n = lad.view.match_count
            matches = lad.matches[:n]
            known = agent in lad.rater.glicko
        if not known:
            raise KeyError(agent)
        cfg = lad.config
        rep = replay_ladder(matches, cfg.elo, cfg.glicko, cfg.tie_value)
        points = [p for p in rep.trajectory if p.agent == agent]
        return {"format": fmt, "agent": agent, "match_count": n,
                "points": [{"match_index": p.match_index, "metric": p.metric, "rating": p.rating,
                            "deviation": p.deviation} for p in points]}

    def h2h(self, fmt: str) -> dict:
        lad = self.ladder(fmt)
        with lad.lock:
            view = lad.view
            matches = lad.matches[: view.match_count]
        agents = [e.agent for e in view.entries]
        if not agents:
            return {"format": fmt, "agents": [], "cells": []}
        table = head_to_head(matches, agents)
        return {"format": fmt, "agents": agents, "cells": table.to_rows()}

    def wait_idle(self, timeout: float | None = 60.0) -> None:
        for lad in list(self.ladders.values()):
            for fut in list(lad.pending):
                fut.result(timeout=timeout)
                lad.pending.discard(fut)

    def pending_refits(self) -> int:
        return sum(1 for lad in self.ladders.values() for f in list(lad.pending) if not f.done())

    def snapshot_all(self) -> None:
        for lad in list(self.ladders.values()):
            lad.snapshot()

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)


def create_app(service: LeaderboardService):
    app = FastAPI(title="ladderstats leaderboard")
    app.state.service = service

    @app.post("/matches")
    async def post_match(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return JSONResponse({"detail": [f"body is not valid JSON: {exc}"]}, status_code=400)
        if not isinstance(body, dict):
            return JSONResponse({"detail": ["body must be a JSON object"]}, status_code=400)
        try:
            match = MatchRecord.from_dict(body)
        except ValueError as exc:
            return JSONResponse({"detail": [str(exc)]}, status_code=422)
        try:
            created = service.submit(match)
        except ConflictError as exc:
            return JSONResponse({"detail": [str(exc)]}, status_code=409)
        except UnknownFormat:
            return JSONResponse({"detail": [f"unknown format {match.format!r}"]}, status_code=404)
        return JSONResponse({"status": "created" if created else "duplicate", "id": match.id},
                            status_code=201 if created else 200)

    @app.get("/formats/{fmt}/leaderboard")
    def get_leaderboard(fmt: str, metric: str | None = None):
        if metric is not None and metric not in PRIMARY_METRICS:
            raise HTTPException(422, f"metric must be one of {', '.join(PRIMARY_METRICS)}")
        try:
            return service.leaderboard(fmt, metric)
        except UnknownFormat:
            raise HTTPException(404, f"unknown format {fmt!r}") from None

    @app.get("/formats/{fmt}/agents/{agent}/trajectory")
    def get_trajectory(fmt: str, agent: str):
        try:
            return service.trajectory(fmt, agent)
        except UnknownFormat:
            raise HTTPException(404, f"unknown format {fmt!r}") from None
        except KeyError:
            raise HTTPException(404, f"unknown agent {agent!r}") from None

    @app.get("/formats/{fmt}/h2h")
    def get_h2h(fmt: str):
        try:
            return service.h2h(fmt)
        except UnknownFormat:
            raise HTTPException(404, f"unknown format {fmt!r}") from None

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "formats": sorted(service.ladders),
                "pending_refits": service.pending_refits()}

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    service = LeaderboardService(config)
    try:
        uvicorn.run(create_app(service), host=config.host, port=config.port, log_level="info")
    finally:
        service.close()
