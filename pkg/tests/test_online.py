from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import mk
from ladderstats.core import RatingState, Result
from ladderstats.online import (EloConfig, GlickoConfig, OnlineRater, elo_update, g, glicko_update, gxe,
                                replay_ladder, write_trajectory)

ratings = st.floats(100, 3000, allow_nan=False)
rds = st.floats(25, 350, allow_nan=False)


def test_elo_symmetric_case():
    assert elo_update(1500, 1500, Result.A_WINS) == (1516.0, 1484.0)


def test_elo_favourite_wins():
    e = 1 / (1 + 10 ** -0.25)
    ra, rb = elo_update(1600, 1500, Result.A_WINS)
    assert ra == pytest.approx(1600 + 32 * (1 - e))
    assert ra == pytest.approx(1611.52, abs=0.005)


def test_elo_underdog_wins():
    _, rb = elo_update(1600, 1500, Result.B_WINS)
    assert rb == pytest.approx(1520.48, abs=0.005)


def test_elo_tie_moves_towards_each_other():
    ra, rb = elo_update(1600, 1500, Result.TIE)
    assert ra < 1600 and rb > 1500


@given(ratings, ratings, st.sampled_from([1.0, 0.5, 0.0]))
def test_elo_zero_sum(ra, rb, s):
    na, nb = elo_update(ra, rb, s)
    assert na + nb == pytest.approx(ra + rb, abs=1e-9)


def test_k_schedule_selects_bracket():
    cfg = EloConfig(k_schedule=((0, 40), (1600, 32), (2000, 16)))
    assert cfg.k_for(1000) == 40
    assert cfg.k_for(1600) == 32
    assert cfg.k_for(2400) == 16
    assert EloConfig(k_schedule=((1000, 24), (1600, 16))).k_for(500) == 24
    with pytest.raises(ValueError):
        EloConfig(k_schedule=((1600, 32), (1600, 16)))
    with pytest.raises(ValueError):
        EloConfig(k=0)


def test_glicko_config_ordering():
    with pytest.raises(ValueError):
        GlickoConfig(rd_floor=400)
    with pytest.raises(ValueError):
        GlickoConfig(rd_ceiling=300)


def test_g_zero_is_one():
    assert g(0) == 1.0


def test_g_350():
    q = math.log(10) / 400
    assert g(350) == pytest.approx(1 / math.sqrt(1 + 3 * q * q * 350 ** 2 / math.pi ** 2))
    assert g(350) == pytest.approx(0.6690, abs=1e-4)


def _glickman_oracle(r, rd, opps):
    q = math.log(10) / 400
    gs = [1 / math.sqrt(1 + 3 * q ** 2 * rdj ** 2 / math.pi ** 2) for _, rdj, _ in opps]
    es = [1 / (1 + 10 ** (-gj * (r - rj) / 400)) for gj, (rj, _, _) in zip(gs, opps)]
    d2 = 1 / (q ** 2 * sum(gj ** 2 * e * (1 - e) for gj, e in zip(gs, es)))
    denom = 1 / rd ** 2 + 1 / d2
    r_new = r + q / denom * sum(gj * (s - e) for gj, e, (_, _, s) in zip(gs, es, opps))
    return r_new, math.sqrt(1 / denom)


def test_glickman_worked_example():
    opps = [(1400, 30, 1.0), (1550, 100, 0.0), (1700, 300, 0.0)]
    new = glicko_update(RatingState(1500, 200), opps)
    r_o, rd_o = _glickman_oracle(1500, 200, opps)
    assert new.rating == pytest.approx(r_o, abs=1e-9)
    assert new.deviation == pytest.approx(rd_o, abs=1e-9)
    assert round(new.rating) == 1464
    assert new.deviation == pytest.approx(151.4, abs=0.05)
    assert (new.games, new.wins, new.losses) == (3, 1, 2)


def test_glicko_empty_period_without_inflation_is_identity():
    s = RatingState(1600, 80, 4, 2, 2, 0)
    assert glicko_update(s, []) == s


def test_glicko_empty_period_inflates_with_c():
    s = RatingState(1600, 80, 4, 2, 2, 0)
    out = glicko_update(s, [], GlickoConfig(c=60))
    assert out.deviation == pytest.approx(100.0)
    assert glicko_update(RatingState(1600, 340), [], GlickoConfig(c=200)).deviation == 350


def test_glicko_rd_floor_and_ceiling():
    s = RatingState(1500, 25)
    for _ in range(50):
        s = glicko_update(s, [(1500, 25, 1.0)])
    assert s.deviation == 25.0


@given(ratings, rds, ratings, rds, st.sampled_from([1.0, 0.5, 0.0]))
def test_glicko_rd_never_increases_with_a_game(r, rd, rj, rdj, s):
    out = glicko_update(RatingState(r, rd), [(rj, rdj, s)])
    assert out.deviation <= rd + 1e-12


def test_gxe_symmetry():
    assert gxe(1500, 0, GlickoConfig(gxe_reference_rd=0)) == 0.5
    for rd in (0, 60, 350):
        assert gxe(1500, rd) == pytest.approx(0.5)


def test_gxe_limit():
    assert gxe(4000, 30) > 0.99


def test_gxe_hand_evaluated():
    cfg = GlickoConfig(gxe_reference_rd=100)
    q = math.log(10) / 400
    comb = math.sqrt(50 ** 2 + 100 ** 2)
    gg = 1 / math.sqrt(1 + 3 * q * q * comb * comb / math.pi ** 2)
    assert gxe(1700, 50, cfg) == pytest.approx(1 / (1 + 10 ** (-gg * 200 / 400)), abs=1e-12)


@given(ratings, ratings, rds)
def test_gxe_monotone_in_rating(r1, r2, rd):
    lo, hi = sorted((r1, r2))
    assert gxe(lo, rd) <= gxe(hi, rd)


@given(st.floats(1501, 3000), rds, rds, st.sampled_from([None, 0.0, 100.0]))
def test_gxe_decreasing_in_rd_above_reference(r, rd1, rd2, ref):
    cfg = GlickoConfig(gxe_reference_rd=ref)
    lo, hi = sorted((rd1, rd2))
    assert gxe(r, hi, cfg) <= gxe(r, lo, cfg) + 1e-15


def test_replay_zero_matches():
    rep = replay_ladder([])
    assert rep.trajectory == [] and rep.elo == {} and rep.glicko == {}


def test_replay_one_match_updates_both_once():
    rep = replay_ladder([mk("1", "A", "B", "a")])
    assert rep.elo["A"].rating == 1516 and rep.elo["B"].rating == 1484
    assert rep.glicko["A"].games == rep.glicko["B"].games == 1
    idx = sorted({p.match_index for p in rep.trajectory})
    assert idx == [0, 1]
    assert len([p for p in rep.trajectory if p.match_index == 1]) == 6


def test_replay_disjoint_permutation_invariant():
    ms = [mk("1", "A", "B", "a", 0), mk("2", "C", "D", "b", 1), mk("3", "A", "C", "tie", 2)]
    swapped = [ms[1], ms[0], ms[2]]
    r1, r2 = replay_ladder(ms), replay_ladder(swapped)
    assert r1.elo == r2.elo and r1.glicko == r2.glicko


def test_replay_is_deterministic(tiny_ladder):
    assert replay_ladder(tiny_ladder).trajectory == replay_ladder(tiny_ladder).trajectory


def test_rater_round_trips_through_dict(tiny_ladder):
    r = OnlineRater()
    for m in tiny_ladder:
        r.apply(m)
    s = OnlineRater()
    s.load_dict(r.to_dict())
    assert s.elo == r.elo and s.glicko == r.glicko and s.count == r.count


def test_trajectory_export(tmp_path, tiny_ladder):
    p = tmp_path / "traj.csv"
    write_trajectory(replay_ladder(tiny_ladder).trajectory, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "match_index,agent,metric,rating,deviation"
    assert len(lines) == 1 + 3 * 3 + 6 * 2 * 3
