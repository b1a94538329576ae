from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from conftest import mk
from ladderstats import service as service_mod
from ladderstats.core import ConflictError, format_line
from ladderstats.ladder import agents_from_ratings, simulate_ladder
from ladderstats.leaderboard import LeaderboardConfig, build_leaderboard
from ladderstats.online import OnlineRater
from ladderstats.store import (LOG_NAME, SNAPSHOT_NAME, MatchLog, load_snapshot, recover, snapshot_state,
                               write_snapshot)
from ladderstats.service import LeaderboardService, ServiceConfig, create_app

LB = LeaderboardConfig(bootstrap_replicates=10, fhbt_min_games=20)


def make_service(tmp_path, **kw):
    kw.setdefault("leaderboard", LB)
    kw.setdefault("refit_every", 50)
    kw.setdefault("snapshot_every", 75)
    return LeaderboardService(ServiceConfig(data_dir=tmp_path, **kw))


def body(m):
    return m.to_dict()


def sim(n, seed=0, fmt="gen9ou"):
    agents = agents_from_ratings({f"bot{i}": 1300 + 50 * i for i in range(8)})
    return simulate_ladder(agents, games=n, seed=seed, format=fmt)


@pytest.fixture
def client(tmp_path):
    svc = make_service(tmp_path)
    with TestClient(create_app(svc)) as c:
        yield c
    svc.close()


def test_post_then_get(client):
    r = client.post("/matches", json=body(mk("1", "A", "B", "a")))
    assert r.status_code == 201
    lb = client.get("/formats/gen9ou/leaderboard").json()
    assert {e["agent"]: e["battles"] for e in lb["entries"]} == {"A": 1, "B": 1}
    assert lb["match_count"] == 1


def test_duplicate_post_is_idempotent(client):
    m = body(mk("1", "A", "B", "a"))
    assert client.post("/matches", json=m).status_code == 201
    r = client.post("/matches", json=m)
    assert r.status_code == 200 and r.json()["status"] == "duplicate"
    lb = client.get("/formats/gen9ou/leaderboard").json()
    assert all(e["battles"] == 1 for e in lb["entries"])


def test_conflicting_duplicate(client):
    client.post("/matches", json=body(mk("1", "A", "B", "a")))
    assert client.post("/matches", json=body(mk("1", "A", "B", "b"))).status_code == 409


def test_malformed_bodies(client):
    r = client.post("/matches", json={"id": "x", "a": "A"})
    assert r.status_code == 422
    assert "ts" in r.json()["detail"][0] and "result" in r.json()["detail"][0]
    r = client.post("/matches", json={**body(mk("1", "A", "B")), "result": "draw"})
    assert r.status_code == 422 and "result" in r.json()["detail"][0]
    assert client.post("/matches", content=b"{not json").status_code == 400
    assert client.post("/matches", json=[1, 2]).status_code == 400


def test_unknown_format_and_agent(client):
    assert client.get("/formats/nope/leaderboard").status_code == 404
    client.post("/matches", json=body(mk("1", "A", "B")))
    assert client.get("/formats/gen9ou/agents/Z/trajectory").status_code == 404
    assert client.get("/formats/gen9ou/leaderboard?metric=vibes").status_code == 422


def test_restricted_formats_reject_unknown(tmp_path):
    svc = make_service(tmp_path, formats=("gen1ou",))
    with TestClient(create_app(svc)) as c:
        assert c.post("/matches", json=body(mk("1", "A", "B", fmt="gen9ou"))).status_code == 404
        assert c.post("/matches", json=body(mk("2", "A", "B", fmt="gen1ou"))).status_code == 201
    svc.close()


def test_read_endpoints(client):
    for m in sim(40):
        client.post("/matches", json=body(m))
    traj = client.get("/formats/gen9ou/agents/bot3/trajectory").json()
    assert traj["agent"] == "bot3" and {p["metric"] for p in traj["points"]} == {"elo", "glicko", "gxe"}
    h2h = client.get("/formats/gen9ou/h2h").json()
    for c in h2h["cells"]:
        mirror = next(d for d in h2h["cells"] if d["row"] == c["col"] and d["col"] == c["row"])
        assert (c["wins"], c["losses"], c["ties"]) == (mirror["losses"], mirror["wins"], mirror["ties"])
    by_elo = client.get("/formats/gen9ou/leaderboard?metric=elo").json()
    elos = [e["elo"] for e in by_elo["entries"]]
    assert elos == sorted(elos, reverse=True) and by_elo["metric"] == "elo"
    health = client.get("/healthz").json()
    assert health["status"] == "ok" and health["formats"] == ["gen9ou"]


def served(svc, fmt="gen9ou"):
    svc.wait_idle()
    return json.dumps(svc.leaderboard(fmt), sort_keys=True)


def test_crash_restart_equals_uninterrupted(tmp_path):
    ms = sim(1000, seed=3)
    crashed = make_service(tmp_path / "a")
    for m in ms[:1000]:
        crashed.submit(m)
    crashed.wait_idle()
    del crashed  # no shutdown hook: only fsync'd log lines and snapshots survive
    restarted = make_service(tmp_path / "a")
    clean = make_service(tmp_path / "b")
    for m in ms:
        clean.submit(m)
    assert served(restarted) == served(clean)
    restarted.close()
    clean.close()


def test_restart_mid_refit_interval(tmp_path):
    ms = sim(130, seed=4)
    first = make_service(tmp_path / "a")
    for m in ms[:90]:
        first.submit(m)
    first.close()
    second = make_service(tmp_path / "a")
    for m in ms[90:]:
        second.submit(m)
    clean = make_service(tmp_path / "b")
    for m in ms:
        clean.submit(m)
    assert served(second) == served(clean)
    second.close()
    clean.close()


def test_out_of_order_arrivals_match_offline(tmp_path):
    ms = sim(120, seed=5)
    shuffled = ms[60:] + ms[:60]
    svc = make_service(tmp_path, refit_every=1000)
    for m in shuffled:
        svc.submit(m)
    offline = build_leaderboard(ms, LB, fit=None, use_fit=True)
    assert svc.leaderboard("gen9ou")["entries"] == [e.to_dict() for e in offline]
    svc.close()
    again = make_service(tmp_path, refit_every=1000)
    assert again.leaderboard("gen9ou")["entries"] == [e.to_dict() for e in offline]
    again.close()


def test_formats_are_independent(tmp_path):
    svc = make_service(tmp_path)
    svc.submit(mk("1", "A", "B", "a", fmt="gen1ou"))
    svc.submit(mk("2", "A", "B", "b", fmt="gen9ou"))
    e1 = {e["agent"]: e for e in svc.leaderboard("gen1ou")["entries"]}
    e9 = {e["agent"]: e for e in svc.leaderboard("gen9ou")["entries"]}
    assert e1["A"]["elo"] > 1500 > e9["A"]["elo"]
    svc.close()


def test_service_submit_conflict(tmp_path):
    svc = make_service(tmp_path)
    assert svc.submit(mk("1", "A", "B")) is True
    assert svc.submit(mk("1", "A", "B")) is False
    with pytest.raises(ConflictError):
        svc.submit(mk("1", "B", "A"))
    svc.close()


def test_reads_do_not_wait_for_refit(tmp_path, monkeypatch):
    svc = make_service(tmp_path, refit_every=10)
    gate = threading.Event()
    real = service_mod.fit_fhbt

    def slow_fit(matches, config):
        gate.wait(10)
        return real(matches, config)

    monkeypatch.setattr(service_mod, "fit_fhbt", slow_fit)
    for m in sim(10, seed=6):
        svc.submit(m)
    view = svc.leaderboard("gen9ou")
    assert view["match_count"] == 10 and view["fhbt_match_count"] == 0
    assert svc.pending_refits() == 1
    gate.set()
    svc.wait_idle()
    assert svc.leaderboard("gen9ou")["fhbt_match_count"] == 10
    svc.close()


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ServiceConfig(data_dir=tmp_path, refit_every=0)
    cfg = ServiceConfig.from_dict({"data_dir": str(tmp_path), "refit_every": 7,
                                   "leaderboard": {"bootstrap_replicates": 5},
                                   "format_configs": {"gen1ou": {"fhbt_min_games": 3}}})
    assert cfg.refit_every == 7 and cfg.config_for("gen1ou").fhbt_min_games == 3
    assert cfg.config_for("gen9ou").bootstrap_replicates == 5


# -- persistence -------------------------------------------------------------

def fill_log(d, ms):
    log = MatchLog(d / LOG_NAME)
    return [log.append(m) for m in ms]


def fold(ms):
    r = OnlineRater()
    for m in sorted(ms, key=lambda m: m.sort_key):
        r.apply(m)
    return r


def test_snapshot_with_no_extra_records(tmp_path):
    ms = sim(60)
    lines = fill_log(tmp_path, ms)
    snap = snapshot_state("gen9ou", fold(ms), lines)
    write_snapshot(tmp_path / SNAPSHOT_NAME, snap)
    rec = recover(tmp_path)
    assert rec.from_snapshot == 60
    assert rec.rater.to_dict() == snap.rater
    assert not (tmp_path / (SNAPSHOT_NAME + ".tmp")).exists()


def test_snapshot_plus_suffix_equals_full_replay(tmp_path):
    ms = sim(90)
    lines = fill_log(tmp_path, ms[:60])
    write_snapshot(tmp_path / SNAPSHOT_NAME, snapshot_state("gen9ou", fold(ms[:60]), lines))
    fill_log(tmp_path, ms[60:])
    rec = recover(tmp_path)
    assert rec.from_snapshot == 60
    assert rec.rater.to_dict() == fold(ms).to_dict()
    assert rec.rater.to_dict() == recover(tmp_path, use_snapshot=False).rater.to_dict()


def test_snapshot_of_prefix_replays_exactly(tmp_path):
    ms = sim(40)
    lines = fill_log(tmp_path, ms)
    snap = snapshot_state("gen9ou", fold(ms), lines)
    assert recover(tmp_path, use_snapshot=False).rater.to_dict() == snap.rater


def test_corrupt_snapshot_falls_back_to_full_replay(tmp_path):
    ms = sim(30)
    lines = fill_log(tmp_path, ms)
    write_snapshot(tmp_path / SNAPSHOT_NAME, snapshot_state("gen9ou", fold(ms), lines))
    raw = (tmp_path / SNAPSHOT_NAME).read_text()
    (tmp_path / SNAPSHOT_NAME).write_text(raw.replace('"count": 30', '"count": 31'))
    assert load_snapshot(tmp_path / SNAPSHOT_NAME) is None
    rec = recover(tmp_path)
    assert rec.from_snapshot == 0 and rec.rater.to_dict() == fold(ms).to_dict()
    (tmp_path / SNAPSHOT_NAME).write_text("{garbage")
    assert recover(tmp_path).rater.to_dict() == fold(ms).to_dict()


def test_snapshot_hash_mismatch_is_discarded(tmp_path):
    ms = sim(30)
    other = sim(30, seed=99)
    write_snapshot(tmp_path / SNAPSHOT_NAME,
                   snapshot_state("gen9ou", fold(other), [format_line(m, "json").encode() for m in other]))
    fill_log(tmp_path, ms)
    rec = recover(tmp_path)
    assert rec.from_snapshot == 0 and rec.rater.to_dict() == fold(ms).to_dict()


def test_torn_final_line_is_truncated(tmp_path, caplog):
    ms = sim(5)
    fill_log(tmp_path, ms)
    path = tmp_path / LOG_NAME
    good = path.read_bytes()
    path.write_bytes(good + b'{"id":"torn","ts":"2025-')
    rec = recover(tmp_path)
    assert len(rec.matches) == 5
    assert path.read_bytes() == good
    assert "torn" in caplog.text


def test_corrupt_interior_line_is_an_error(tmp_path):
    fill_log(tmp_path, sim(3))
    path = tmp_path / LOG_NAME
    lines = path.read_bytes().split(b"\n")
    lines[1] = b"not a record"
    path.write_bytes(b"\n".join(lines))
    with pytest.raises(ValueError, match="line 2"):
        recover(tmp_path)
