"""Figures for the report paths of the CLI.  Everything renders off-screen to a file."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import METHODS, Comparison, SVDResult  # noqa: E402
from .core import HeadToHead  # noqa: E402
from .leaderboard import LeaderboardEntry  # noqa: E402
from .statespace import StateSpaceReport  # noqa: E402

METHOD_LABELS = {"elo": "Elo", "glicko": "Glicko-1", "gxe": "GXE", "fhbt": "FH-BT"}

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "svg.hashsalt": "ladderstats",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # pin metadata so identical inputs give identical files
    suffix = path.suffix.lower()
    meta = None
    if suffix == ".png":
        meta = {"Software": None}
    elif suffix == ".svg":
        meta = {"Date": None, "Creator": None}
    elif suffix == ".pdf":
        meta = {"CreationDate": None, "Creator": None}
    fig.savefig(path, bbox_inches="tight", metadata=meta)
    plt.close(fig)
    return path


def plot_comparison(comp: Comparison, path: str | Path, agents: Sequence[str] | None = None,
                    max_agents: int = 6) -> Path:
    """Rank-correlation heatmap plus Glicko-1 trajectories with +-2 RD bands and FH-BT intervals."""
    with plt.rc_context(RC):
        fig, (ax_m, ax_t) = plt.subplots(1, 2, figsize=(11, 4.2), gridspec_kw={"width_ratios": [1, 1.6]})
        m = comp.matrix()
        im = ax_m.imshow(m, vmin=-1, vmax=1, cmap="RdBu_r")
        labels = [METHOD_LABELS[x] for x in METHODS]
        ax_m.set_xticks(range(len(METHODS)), labels)
        ax_m.set_yticks(range(len(METHODS)), labels)
        for i in range(len(METHODS)):
            for j in range(len(METHODS)):
                txt = "n/a" if np.isnan(m[i, j]) else f"{m[i, j]:.2f}"
                ax_m.text(j, i, txt, ha="center", va="center", fontsize=8)
        ax_m.set_title(f"Spearman rank correlation ({comp.checkpoints[-1]} matches)")
        fig.colorbar(im, ax=ax_m, fraction=0.046, pad=0.04)

        final = comp.scores[comp.checkpoints[-1]]["glicko"]
        chosen = list(agents) if agents else sorted(final, key=lambda a: -final[a])[:max_agents]
        colors = plt.cm.tab10(np.linspace(0, 1, 10))
        for k, a in enumerate(chosen):
            pts = [p for p in comp.trajectory if p.agent == a and p.metric == "glicko"]
            x = np.array([p.match_index for p in pts])
            y = np.array([p.rating for p in pts])
            rd = np.array([p.deviation for p in pts])
            c = colors[k % 10]
            ax_t.plot(x, y, color=c, lw=1.2, label=a)
            ax_t.fill_between(x, y - 2 * rd, y + 2 * rd, color=c, alpha=0.15, lw=0)
            for cp, band in comp.fhbt_bands.items():
                if a in band:
                    p, lo, hi = band[a]
                    ax_t.errorbar([cp], [p], yerr=[[p - lo], [hi - p]], fmt="s", ms=3, color=c, capsize=2)
        ax_t.set_xlabel("matches played (ladder-wide)")
        ax_t.set_ylabel("rating")
        ax_t.set_title("Glicko-1 trajectories (band: 2 RD); squares: FH-BT 95% bootstrap")
        if chosen:
            ax_t.legend(fontsize=7, ncol=2, frameon=False)
        return _save(fig, path)


def plot_leaderboard(entries: Sequence[LeaderboardEntry], path: str | Path, top: int = 20) -> Path:
    """Side-by-side bars of Elo, GXE, win rate and battles played."""
    rows = list(entries)[:top]
    names = [e.agent for e in rows][::-1]
    panels = [
        ("Elo", [e.elo for e in rows][::-1]),
        ("GXE", [100 * e.gxe for e in rows][::-1]),
        ("Win rate (%)", [100 * e.win_rate for e in rows][::-1]),
        ("Battles played", [e.battles for e in rows][::-1]),
    ]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 4, figsize=(12, 0.3 * len(rows) + 1.5), sharey=True)
        for ax, (title, vals) in zip(axes, panels):
            ax.barh(range(len(names)), vals, color="#4c72b0")
            ax.set_title(title)
            if title == "Elo" and vals:
                lo = min(vals)
                ax.set_xlim(lo - 50, max(vals) + 25)
        axes[0].set_yticks(range(len(names)), names)
        return _save(fig, path)


def plot_h2h(table: HeadToHead, path: str | Path) -> Path:
    """Row-player win rate heatmap annotated with W-L records."""
    n = len(table.agents)
    m = np.full((n, n), np.nan)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(0.7 * n + 2, 0.6 * n + 1.5))
        for i, a in enumerate(table.agents):
            for j, b in enumerate(table.agents):
                wr = table.win_rate(a, b) if a != b else None
                if wr is not None:
                    m[i, j] = wr
                    c = table.cell(a, b)
                    ax.text(j, i, f"{c.wins}-{c.losses}", ha="center", va="center", fontsize=7)
        ax.imshow(m, vmin=0, vmax=1, cmap="RdYlGn")
        ax.set_xticks(range(n), table.agents, rotation=45, ha="right")
        ax.set_yticks(range(n), table.agents)
        ax.set_title("Head-to-head (row vs column)")
        return _save(fig, path)


def plot_usage_cdf(curves: Mapping[str, Sequence[float]], path: str | Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, cdf in curves.items():
            ax.plot(np.arange(1, len(cdf) + 1), cdf, marker=".", ms=3, label=label)
        ax.set_xlabel("top-k entries")
        ax.set_ylabel("cumulative usage share")
        ax.set_ylim(0, 1.02)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_statespace(reports: Sequence[StateSpaceReport], path: str | Path) -> Path:
    """Stacked log10 contributions: two teams, then each battle-only factor."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(7, 0.7 * len(reports) + 1.5))
        for y, r in enumerate(reports):
            left = 0.0
            parts = [("2 x team", 2 * r.team_space_log10)] + [(k, v.log10) for k, v in r.battle_factors.items()]
            for k, (name, w) in enumerate(parts):
                ax.barh(y, w, left=left, color=plt.cm.tab20(k % 20), edgecolor="white", lw=0.5)
                if w > 25:
                    ax.text(left + w / 2, y, name, ha="center", va="center", fontsize=6)
                left += w
            ax.text(left + 5, y, f"10^{r.battle_space_log10:.1f}", va="center", fontsize=8)
        ax.set_yticks(range(len(reports)), [r.label for r in reports])
        ax.set_xlabel("log10 states")
        return _save(fig, path)


def plot_svd(result: SVDResult, path: str | Path, target: tuple[str, float] | None = None) -> Path:
    with plt.rc_context(RC):
        fig, (ax_s, ax_c) = plt.subplots(1, 2, figsize=(10, 3.5))
        s2 = result.singular_values ** 2
        cum = np.cumsum(s2) / s2.sum() if s2.sum() > 0 else s2
        ax_s.plot(np.arange(1, len(cum) + 1), cum, marker="o", ms=3)
        ax_s.axvline(result.k, color="grey", ls=":")
        ax_s.set_xlabel("rank k")
        ax_s.set_ylabel("variance explained")
        r2 = sorted(result.per_column_r2.items(), key=lambda kv: kv[1])
        labels = [k for k, _ in r2]
        vals = [v for _, v in r2]
        colors = ["#4c72b0"] * len(vals)
        if target is not None:
            labels.insert(0, target[0])
            vals.insert(0, target[1])
            colors.insert(0, "#c44e52")
        ax_c.bar(range(len(vals)), vals, color=colors)
        ax_c.set_xticks(range(len(vals)), labels, rotation=90, fontsize=5)
        ax_c.set_ylabel(f"column r^2 at rank {result.k}")
        ax_c.set_ylim(0, 1.0 if not vals else max(1.0, math.ceil(max(vals))))
        return _save(fig, path)
