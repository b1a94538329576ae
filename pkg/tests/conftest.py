from __future__ import annotations

import sys
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ladderstats.core import MatchRecord, Result

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

T0 = datetime(2025, 7, 1, tzinfo=timezone.utc)


def mk(id: str, a: str, b: str, result: str = "a", t: float = 0, fmt: str = "gen9ou") -> MatchRecord:
    return MatchRecord(id, T0 + timedelta(seconds=t), fmt, a, b, Result(result))


AGENTS = ["alpha", "beta", "gamma", "delta", "eps"]


@st.composite
def match_lists(draw, min_size=0, max_size=25, agents=AGENTS):
    n = draw(st.integers(min_size, max_size))
    out = []
    for i in range(n):
        a = draw(st.sampled_from(agents))
        b = draw(st.sampled_from([x for x in agents if x != a]))
        r = draw(st.sampled_from(["a", "b", "tie"]))
        t = draw(st.integers(0, 50))
        out.append(mk(f"m{i:03d}", a, b, r, t))
    return out


@pytest.fixture
def tiny_ladder():
    """Six games among three agents with hand-tallied records."""
    return [
        mk("g1", "A", "B", "a", 1),
        mk("g2", "A", "B", "b", 2),
        mk("g3", "B", "C", "a", 3),
        mk("g4", "C", "A", "tie", 4),
        mk("g5", "A", "C", "a", 5),
        mk("g6", "C", "B", "a", 6),
    ]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(results, key=lambda c: int(c[1:])):
            terminalreporter.write_line(results[cid][1])
