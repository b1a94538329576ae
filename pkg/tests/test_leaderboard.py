from __future__ import annotations

import json

import pytest

from conftest import mk
from ladderstats.analysis import spearman
from ladderstats.leaderboard import (FHBTScore, LeaderboardConfig, LeaderboardEntry, build_leaderboard, dumps_leaderboard,
                                     sort_entries, write_leaderboard)
from ladderstats.ladder import agents_from_ratings, simulate_ladder, true_display_ratings

FAST = LeaderboardConfig(bootstrap_replicates=0)


def test_empty_matches_give_empty_leaderboard():
    assert build_leaderboard([], FAST) == []


def test_single_win_ranks_winner_first_everywhere():
    entries = build_leaderboard([mk("1", "A", "B", "a")], LeaderboardConfig(fhbt_min_games=1, bootstrap_replicates=20))
    by = {e.agent: e for e in entries}
    for metric in ("elo", "glicko", "gxe", "fhbt", "winrate"):
        assert by["A"].metric(metric) > by["B"].metric(metric), metric
    assert [e.agent for e in entries] == ["A", "B"]


def _series(n, a="A", b="B"):
    return [mk(f"s{i:04d}", a, b, "ab"[i % 2], i) for i in range(n)]


def test_fhbt_needs_minimum_battles():
    assert all(e.fhbt is None for e in build_leaderboard(_series(249), FAST))
    assert all(e.fhbt is not None for e in build_leaderboard(_series(250), FAST))


def test_fhbt_present_iff_enough_battles():
    ms = _series(300) + [mk(f"x{i}", "A", "C", "a", 1000 + i) for i in range(10)]
    for e in build_leaderboard(ms, FAST):
        assert (e.fhbt is not None) == (e.battles >= 250)


def test_win_rate_counts_ties_as_half():
    ms = [mk("1", "A", "B", "a"), mk("2", "A", "B", "tie", 1), mk("3", "B", "A", "a", 2)]
    e = {x.agent: x for x in build_leaderboard(ms, FAST)}["A"]
    assert (e.wins, e.losses, e.ties, e.battles) == (1, 1, 1, 3)
    assert e.win_rate == pytest.approx(0.5)


def test_recovers_true_order_on_synthetic_ladder():
    agents = agents_from_ratings({f"a{i}": 1100 + 90 * i for i in range(10)})
    ms = simulate_ladder(agents, games=2500, seed=5)
    cfg = LeaderboardConfig(bootstrap_replicates=0, primary_metric="fhbt")
    entries = build_leaderboard(ms, cfg)
    truth = true_display_ratings(agents)
    assert all(e.fhbt is not None for e in entries)
    assert spearman([truth[e.agent] for e in entries], [e.fhbt.rating for e in entries]) >= 0.9


def entry(agent, fhbt, battles):
    score = None if fhbt is None else FHBTScore(fhbt, fhbt, fhbt, 1.0)
    return LeaderboardEntry(agent, 1500, 1500, 100, 0.5, score, 0.5, battles)


def test_sort_puts_missing_metric_last_then_battles_then_name():
    es = [entry("c", None, 500), entry("b", 1600, 300), entry("a", 1600, 300), entry("d", 1700, 1)]
    assert [e.agent for e in sort_entries(es, "fhbt")] == ["d", "a", "b", "c"]
    assert [e.agent for e in sort_entries(es, "battles")] == ["c", "a", "b", "d"]
    with pytest.raises(ValueError):
        es[0].metric("nope")


def test_config_round_trip_and_validation():
    cfg = LeaderboardConfig.from_dict({"elo": {"k": 24, "k_schedule": [[0, 40], [2000, 16]]},
                                       "glicko": {"rd_floor": 30}, "bt": {"regularization": 0.5},
                                       "fhbt_min_games": 100, "primary_metric": "elo"})
    assert cfg.elo.k_for(2100) == 16 and cfg.bt.regularization == 0.5
    assert LeaderboardConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        LeaderboardConfig(primary_metric="vibes")


def test_leaderboard_files(tmp_path, tiny_ladder):
    entries = build_leaderboard(tiny_ladder, LeaderboardConfig(fhbt_min_games=1, bootstrap_replicates=10))
    write_leaderboard(entries, tmp_path / "lb.json")
    back = [LeaderboardEntry.from_dict(d) for d in json.loads((tmp_path / "lb.json").read_text())]
    assert back == entries
    write_leaderboard(entries, tmp_path / "lb.csv")
    lines = (tmp_path / "lb.csv").read_text().splitlines()
    assert lines[0].startswith("rank,agent,elo") and len(lines) == 4
    assert dumps_leaderboard(entries) == dumps_leaderboard(back)
