"""Ratings, rankings and state-space accounting for competitive game ladders."""

from __future__ import annotations

from .analysis import (Comparison, ScoreMatrix, compare_raters, orthogonality_report, project_new_column,
                       read_score_matrix, spearman, svd_variance)
from .btfit import BTConfig, BTFit, DisconnectedError, bt_bootstrap, bt_fit, bt_predict
from .core import (ConflictError, HeadToHead, IngestError, MatchRecord, RatingState, Result, head_to_head,
                   ingest_matches, read_match_log)
from .leaderboard import LeaderboardConfig, LeaderboardEntry, build_leaderboard
from .ladder import (MatchmakingPolicy, SyntheticAgent, load_bracket_fixture, replay_fixture, run_bracket,
                     select_qualifiers, simulate_ladder)
from .online import EloConfig, GlickoConfig, OnlineRater, elo_update, glicko_update, gxe, replay_ladder
from .statespace import (FormatParameters, Ruleset, battle_space, effective_team_space, ev_spread_count,
                         team_space, usage_cdf)

__version__ = "0.1.0"

__all__ = [
    "BTConfig", "BTFit", "Comparison", "ConflictError", "DisconnectedError", "EloConfig", "FormatParameters",
    "GlickoConfig", "HeadToHead", "IngestError", "LeaderboardConfig", "LeaderboardEntry", "MatchRecord",
    "MatchmakingPolicy", "OnlineRater", "RatingState", "Result", "Ruleset", "ScoreMatrix", "SyntheticAgent",
    "battle_space", "bt_bootstrap", "bt_fit", "bt_predict", "build_leaderboard", "compare_raters",
    "effective_team_space", "elo_update", "ev_spread_count", "glicko_update", "gxe", "head_to_head",
    "ingest_matches", "load_bracket_fixture", "orthogonality_report", "project_new_column", "read_match_log",
    "read_score_matrix", "replay_fixture", "replay_ladder", "run_bracket", "select_qualifiers",
    "simulate_ladder", "spearman", "svd_variance", "team_space", "usage_cdf",
]
