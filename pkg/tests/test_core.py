from __future__ import annotations

import json

import pytest
from hypothesis import given

from conftest import mk, match_lists
from ladderstats.core import (ConflictError, H2HCell, IngestError, MatchRecord, RatingState, format_line,
                              head_to_head, ingest_matches, ingest_report, parse_line, parse_timestamp,
                              read_match_log, split_formats, write_match_log)


def test_empty_source_gives_empty_list():
    assert ingest_matches([]) == []


def test_identical_duplicates_collapse():
    m = mk("x", "A", "B")
    assert ingest_matches([m, m]) == [m]


def test_conflicting_duplicate_is_hard_error():
    with pytest.raises(ConflictError):
        ingest_matches([mk("x", "A", "B", "a"), mk("x", "A", "B", "b")])


def test_out_of_order_records_are_sorted():
    ms = [mk("c", "A", "B", t=30), mk("a", "A", "B", t=10), mk("b", "B", "A", t=20)]
    assert ingest_matches(ms) == sorted(ms, key=lambda m: (m.timestamp, m.id))


def test_equal_timestamps_break_on_id():
    ms = [mk("z", "A", "B", t=5), mk("m", "A", "B", t=5)]
    assert [m.id for m in ingest_matches(ms)] == ["m", "z"]


def test_malformed_records_rejected_with_line_numbers():
    lines = [
        "id,ts,format,a,b,result",
        "m1,2025-07-01T00:00:00Z,gen9ou,A,B,a",
        "m2,2025-07-01T00:00:01Z,gen9ou,A,A,a",
        "m3,2025-07-01T00:00:02Z,gen9ou,A,B,draw",
        "m4,2025-07-01T00:00:03Z,gen9ou,A,B",
        "",
        '{"id":"m5","ts":"2025-07-01T00:00:04Z","format":"gen9ou","a":"A","b":"C","result":"tie"}',
    ]
    matches, rej = ingest_report(lines)
    assert [m.id for m in matches] == ["m1", "m5"]
    assert [r.line for r in rej] == [3, 4, 5]
    assert "itself" in rej[0].message
    assert "result" in rej[1].message
    with pytest.raises(IngestError) as exc:
        ingest_matches(lines)
    assert len(exc.value.rejections) == 3
    assert len(ingest_matches(lines, strict=False)) == 2


def test_naive_timestamp_rejected():
    with pytest.raises(ValueError):
        MatchRecord.from_dict({"id": "x", "ts": "2025-07-01T00:00:00", "format": "f", "a": "A", "b": "B",
                               "result": "a"})


def test_timestamp_offsets_normalize_to_utc():
    assert parse_timestamp("2025-07-01T02:00:00+02:00") == parse_timestamp("2025-07-01T00:00:00Z")


@given(match_lists())
def test_ingestion_is_idempotent(ms):
    once = ingest_matches(ms)
    assert ingest_matches(once) == once


@given(match_lists(min_size=1, max_size=5))
def test_line_format_round_trips_bit_exact(ms):
    for m in ms:
        for style in ("csv", "json"):
            line = format_line(m, style)
            back = MatchRecord.from_dict(parse_line(line))
            assert back == m
            assert format_line(back, style) == line


def test_awkward_names_survive_both_styles():
    m = mk("id,1", 'has "quotes"', "comma, name", "tie")
    for style in ("csv", "json"):
        assert MatchRecord.from_dict(parse_line(format_line(m, style))) == m


def test_match_log_file_round_trip(tmp_path):
    ms = [mk(f"m{i}", "A", "B", "ab"[i % 2], i) for i in range(5)]
    for style in ("csv", "json"):
        p = tmp_path / f"log.{style}"
        write_match_log(ms, p, style=style, header=True)
        assert read_match_log(p) == ms


def test_rating_state_invariants():
    with pytest.raises(ValueError):
        RatingState(1500, 0, games=3, wins=1, losses=1, ties=0)
    with pytest.raises(ValueError):
        RatingState(1500, -1)
    s = RatingState(1500).with_results([1.0, 0.5, 0.0])
    assert (s.games, s.wins, s.ties, s.losses) == (3, 1, 1, 1)
    assert s.win_rate() == pytest.approx(0.5)


def test_h2h_no_matches_all_empty():
    t = head_to_head([], ["A", "B"])
    assert all(t.cell(i, j).empty for i in "AB" for j in "AB")


def test_h2h_single_win():
    t = head_to_head([mk("1", "A", "B", "a")], ["A", "B"])
    assert t.cell("A", "B") == H2HCell(1, 0, 0)
    assert t.cell("B", "A") == H2HCell(0, 1, 0)


def test_h2h_hand_tally(tiny_ladder):
    t = head_to_head(tiny_ladder, ["A", "B", "C"])
    assert t.cell("A", "B") == H2HCell(1, 1, 0)
    assert t.cell("A", "C") == H2HCell(1, 0, 1)
    assert t.cell("B", "C") == H2HCell(1, 1, 0)
    assert t.cell("C", "A") == H2HCell(0, 1, 1)


def test_h2h_requires_agents():
    with pytest.raises(ValueError):
        head_to_head([], [])


@given(match_lists())
def test_h2h_antisymmetry(ms):
    agents = ["alpha", "beta", "gamma", "delta", "eps"]
    t = head_to_head(ms, agents)
    for i in agents:
        assert t.cell(i, i).empty
        for j in agents:
            c, d = t.cell(i, j), t.cell(j, i)
            assert (c.wins, c.losses, c.ties) == (d.losses, d.wins, d.ties)


@given(match_lists(min_size=1))
def test_win_rate_invariant_under_relabeling(ms):
    rename = {"alpha": "zz", "beta": "yy", "gamma": "xx", "delta": "ww", "eps": "vv"}
    renamed = [mk(m.id, rename[m.a], rename[m.b], m.result.value) for m in ms]
    before = {a: RatingState(0).with_results([m.score_for(a) for m in ms if a in (m.a, m.b)]) for a in rename}
    after = {a: RatingState(0).with_results([m.score_for(rename[a]) for m in renamed
                                            if rename[a] in (m.a, m.b)]) for a in rename}
    for a in rename:
        assert before[a].win_rate() == after[a].win_rate()


def test_formats_are_split():
    ms = [mk("1", "A", "B", fmt="gen1ou"), mk("2", "A", "B", fmt="gen9ou")]
    groups = split_formats(ms)
    assert set(groups) == {"gen1ou", "gen9ou"}
    assert json.loads(format_line(ms[0], "json"))["format"] == "gen1ou"
