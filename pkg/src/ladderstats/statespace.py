"""Exact team-configuration and battle-state counts for Gen 1 OU, Gen 9 OU and Gen 9 VGC.

Every factor is an exact Python integer; log10 values come from the exact
integers (``math.log10`` accepts arbitrarily large ints), so nothing
overflows.  HP uses a representative max-HP of 300 (301 states) and is the
only approximate factor.  Move PP is excluded unless ``include_pp`` is set.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from functools import reduce
from operator import mul


def _prod(xs) -> int:
    return reduce(mul, xs, 1)


@dataclass(frozen=True)
class BigCount:
    value: int

    def __post_init__(self):
        if not isinstance(self.value, int) or self.value < 0:
            raise ValueError("BigCount holds a non-negative integer")

    @property
    def log10(self) -> float:
        return math.log10(self.value) if self.value else -math.inf

    def __int__(self) -> int:
        return self.value

    def __mul__(self, other: "BigCount | int") -> "BigCount":
        return BigCount(self.value * int(other))

    def __pow__(self, k: int) -> "BigCount":
        return BigCount(self.value ** k)

    def __str__(self) -> str:
        return f"{self.value:,}"


def choose(n: int, k: int) -> BigCount:
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"choose({n}, {k}) needs 0 <= k <= n")
    return BigCount(math.comb(n, k))


def ev_spread_count(stats: int = 6, budget_units: int = 127, cap_units: int = 63) -> BigCount:
    """Non-negative integer vectors of length ``stats`` with sum <= budget and entries <= cap.

    Stars and bars with a slack variable, then inclusion-exclusion over the set
    of stats pushed past the cap (all orders, not just the first).
    """
    if stats < 1 or budget_units < 0 or cap_units < 0:
        raise ValueError("stats must be positive, budget and cap non-negative")
    total = 0
    for j in range(stats + 1):
        rest = budget_units - j * (cap_units + 1)
        if rest < 0:
            break
        total += (-1) ** j * math.comb(stats, j) * math.comb(rest + stats, stats)
    return BigCount(total)


class Ruleset(str, Enum):
    GEN1OU = "gen1ou"
    GEN9OU = "gen9ou"
    GEN9VGC = "gen9vgc"

    @property
    def family(self) -> str:
        return "gen1" if self is Ruleset.GEN1OU else "gen9"


@dataclass(frozen=True)
class FormatParameters:
    """Named counting constants for one game generation.

    Gen 1 has no abilities, IVs, natures, items or Terastallization; those
    fields are ``None`` there.  Gen 9 has no DV choice.
    """

    family: str
    species_pool: int
    max_movepool: int
    moves_per_set: int = 4
    abilities_per_species: int | None = None
    iv_values: int | None = None
    natures_effective: int | None = None
    held_items: int | None = None
    tera_types: int | None = None
    dv_choices: int | None = None
    ev_stats: int = 6
    ev_budget_units: int = 127
    ev_cap_units: int = 63
    team_size: int = 6
    hp_states: int = 301
    stat_stages: int = 13
    modifiable_stats: int = 7
    status_states: int = 9

    def __post_init__(self):
        if self.family not in ("gen1", "gen9"):
            raise ValueError(f"unknown family {self.family!r}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and not isinstance(v, bool) and v <= 0:
                raise ValueError(f"{f.name} must be a positive integer")
        needed = (("abilities_per_species", "iv_values", "natures_effective", "held_items", "tera_types")
                  if self.family == "gen9" else ("dv_choices",))
        missing = [n for n in needed if getattr(self, n) is None]
        if missing:
            raise ValueError(f"{self.family} parameters need {', '.join(missing)}")

    @classmethod
    def gen9(cls, **overrides) -> "FormatParameters":
        base = cls(family="gen9", species_pool=1329, max_movepool=375, abilities_per_species=3,
                   iv_values=32, natures_effective=21, held_items=248, tera_types=19,
                   modifiable_stats=7, status_states=9)
        return replace(base, **overrides)

    @classmethod
    def gen1(cls, **overrides) -> "FormatParameters":
        base = cls(family="gen1", species_pool=151, max_movepool=164, dv_choices=2,
                   modifiable_stats=6, status_states=27)
        return replace(base, **overrides)

    @classmethod
    def for_ruleset(cls, ruleset: "Ruleset | str", **overrides) -> "FormatParameters":
        rs = Ruleset(ruleset)
        return cls.gen1(**overrides) if rs.family == "gen1" else cls.gen9(**overrides)


# Per-active volatile factors, one entry per independently tracked condition.
GEN9_INDEPENDENT_VOLATILES: tuple[tuple[str, int], ...] = (
    ("confusion", 5), ("attract", 2), ("leech_seed", 2), ("substitute", 2), ("taunt", 5),
    ("encore", 4), ("disable", 5), ("torment", 2), ("perish_song", 4), ("aqua_ring", 2),
    ("ingrain", 2), ("focus_energy", 2), ("yawn", 3), ("curse", 2), ("no_retreat", 2),
    ("tar_shot", 2), ("salt_cure", 2), ("syrup_bomb", 4), ("imprison", 2), ("charge", 2),
    ("minimize", 2), ("defense_curl", 2), ("stockpile", 4), ("glaive_rush", 2), ("gastro_acid", 2),
    ("power_trick", 2), ("transform", 2), ("trapped", 2), ("throat_chop", 3), ("lock_on", 2),
)

GEN9_EXCLUSIVE_VOLATILES: tuple[tuple[str, int], ...] = (
    ("move_lock", 1 + 3 + 1 + 1 + 3 + 5 + 5),
    ("protection", 1 + 8),
    ("grounding", 1 + 1 + 5),
    ("ability_volatile", 1 + 1 + 1 + 5 + 1 + 1),
    ("self_one_turn", 1 + 1 + 1),
    ("type_override", 1 + 18 + 1),
    ("type_addition", 1 + 1 + 1),
    ("choice_lock", 1 + 4),
)

GEN9_OTHER_VOLATILES: tuple[tuple[str, int], ...] = (
    ("stall_counter", 2), ("partial_trapping", 8), ("flinch", 2), ("powder", 2), ("electrify", 2),
)

VGC_EXTRA_VOLATILES: tuple[tuple[str, int], ...] = (
    ("helping_hand", 2), ("redirection", 4), ("dragon_cheer", 2), ("ally_switch", 2),
)

GEN1_VOLATILES: tuple[tuple[str, int], ...] = (
    ("confusion", 5), ("leech_seed", 2), ("substitute", 2), ("focus_energy", 2), ("disable", 1 + 4 * 7),
    ("reflect", 2), ("light_screen", 2), ("mist", 2), ("minimize", 2), ("transform", 2), ("rage", 2),
    ("move_lock", 1 + 3 + 1 + 1 + 2 + 4),
    ("partial_trapping_defender", 5), ("residual_counter", 16), ("flinch", 2),
)

GEN9_SIDE_CONDITIONS: tuple[tuple[str, int], ...] = (
    ("hazards", 2 * 4 * 3 * 2), ("screens", 9 ** 3), ("tailwind", 5), ("safeguard", 6), ("mist", 6),
)
VGC_SIDE_EXTRAS: tuple[tuple[str, int], ...] = (
    ("fire_pledge", 5), ("water_pledge", 5), ("grass_pledge", 5),
    ("quick_guard", 2), ("wide_guard", 2), ("crafty_shield", 2), ("mat_block", 2),
)
PSEUDO_WEATHER: tuple[tuple[str, int], ...] = (
    ("trick_room", 6), ("gravity", 6), ("magic_room", 6), ("wonder_room", 6), ("fairy_lock", 3),
)
WEATHER_STATES = 1 + 4 * 8 + 3
TERRAIN_STATES = 1 + 4 * 8
SLOT_STATES = 2 * 3 * 2  # wish, future sight, healing wish


@dataclass(frozen=True)
class VolatileReport:
    ruleset: Ruleset
    factors: dict[str, int]
    independent: BigCount
    total: BigCount


def volatile_count(ruleset: Ruleset | str) -> VolatileReport:
    """Per-active volatile-status states, each contributing factor named."""
    rs = Ruleset(ruleset)
    if rs is Ruleset.GEN1OU:
        factors = dict(GEN1_VOLATILES)
        indep = _prod(v for k, v in GEN1_VOLATILES[:11])
    else:
        groups = GEN9_INDEPENDENT_VOLATILES + GEN9_EXCLUSIVE_VOLATILES + GEN9_OTHER_VOLATILES
        if rs is Ruleset.GEN9VGC:
            groups += VGC_EXTRA_VOLATILES
        factors = dict(groups)
        indep = _prod(v for _, v in GEN9_INDEPENDENT_VOLATILES)
    return VolatileReport(rs, factors, BigCount(indep), BigCount(_prod(factors.values())))


def side_condition_count(ruleset: Ruleset | str) -> BigCount:
    rs = Ruleset(ruleset)
    if rs is Ruleset.GEN1OU:
        return BigCount(1)
    items = GEN9_SIDE_CONDITIONS + (VGC_SIDE_EXTRAS if rs is Ruleset.GEN9VGC else ())
    return BigCount(_prod(v for _, v in items))


def pseudo_weather_count() -> BigCount:
    return BigCount(_prod(v for _, v in PSEUDO_WEATHER))


@dataclass
class StateSpaceReport:
    label: str
    team_factors: dict[str, BigCount] = field(default_factory=dict)
    battle_factors: dict[str, BigCount] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def factors(self) -> dict[str, BigCount]:
        return {**self.team_factors, **self.battle_factors}

    @property
    def team_space(self) -> BigCount:
        return BigCount(_prod(f.value for f in self.team_factors.values()))

    @property
    def team_space_log10(self) -> float:
        return sum(f.log10 for f in self.team_factors.values())

    @property
    def battle_space(self) -> BigCount:
        return BigCount(self.team_space.value ** 2 * _prod(f.value for f in self.battle_factors.values()))

    @property
    def battle_space_log10(self) -> float:
        if not self.battle_factors:
            return math.nan
        return 2 * self.team_space_log10 + sum(f.log10 for f in self.battle_factors.values())


def team_space(params: FormatParameters) -> StateSpaceReport:
    n = params.team_size
    movesets = choose(params.max_movepool, params.moves_per_set)
    f: dict[str, BigCount] = {"species": choose(params.species_pool, n), "movesets": movesets ** n}
    if params.family == "gen9":
        f["abilities"] = BigCount(params.abilities_per_species ** n)
        f["ivs"] = BigCount(params.iv_values ** (params.ev_stats * n))
        f["evs"] = ev_spread_count(params.ev_stats, params.ev_budget_units, params.ev_cap_units) ** n
        f["natures"] = BigCount(params.natures_effective ** n)
        f["items"] = BigCount(params.held_items ** n)
        f["tera"] = BigCount(params.tera_types ** n)
        label = "gen9"
    else:
        f["dvs"] = BigCount(params.dv_choices ** n)
        label = "gen1"
    return StateSpaceReport(label=label, team_factors=f,
                            notes={"movesets": f"choose({params.max_movepool},{params.moves_per_set}) = {movesets}"})


def battle_space(params: FormatParameters, ruleset: Ruleset | str,
                 include_pp: bool = False) -> StateSpaceReport:
    rs = Ruleset(ruleset)
    if params.family != rs.family:
        raise ValueError(f"ruleset {rs.value} needs {rs.family} parameters, got {params.family}")
    report = team_space(params)
    report.label = rs.value
    n = params.team_size
    b: dict[str, BigCount] = {}
    if rs is Ruleset.GEN9VGC:
        brought, actives = 4, 2
        b["team_preview"] = BigCount(math.comb(n, brought) ** 2)
        b["active_positions"] = BigCount(math.perm(brought, actives) ** 2)
    else:
        brought, actives = n, 1
        b["active_positions"] = BigCount(n * n)
    pool = 2 * brought
    b["hp"] = BigCount(params.hp_states ** pool)
    b["stat_stages"] = BigCount(params.stat_stages ** (params.modifiable_stats * 2 * actives))
    b["status"] = BigCount(params.status_states ** pool)
    vol = volatile_count(rs).total
    b["volatiles"] = vol ** (2 * actives)
    if rs.family == "gen9":
        b["field"] = BigCount(WEATHER_STATES * TERRAIN_STATES)
        b["side_conditions"] = side_condition_count(rs) ** 2
        b["tera_state"] = BigCount((1 + brought) ** 2)
        b["pseudo_weather"] = pseudo_weather_count()
        b["slot_conditions"] = BigCount(SLOT_STATES ** (2 * actives))
        b["item_ability_state"] = BigCount(3 ** pool * 2 ** pool)
    if include_pp:
        b["pp"] = BigCount(2 ** (pool * params.moves_per_set))
    report.battle_factors = b
    return report


@dataclass(frozen=True)
class UsageSummary:
    """Per-format usage-derived option counts; missing dimensions are None."""

    species: int
    moves: float
    items: float | None = None
    abilities: float | None = None
    spreads: float | None = None
    team_size: int = 6
    moves_per_set: int = 4


OU_USAGE_GEN1 = UsageSummary(species=45, moves=13.0)
OU_USAGE_GEN9 = UsageSummary(species=117, moves=14.0, items=6.6, abilities=1.7, spreads=7.8)


def _log10_choose_real(m: float, k: int) -> float:
    if m < k:
        raise ValueError(f"need at least {k} options, got {m}")
    return (math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1)) / math.log(10)


def effective_team_space(usage: UsageSummary) -> tuple[float, dict[str, float]]:
    """Naive product estimate of the usage-restricted team space, in log10.

    ``log10 C(S, 6) + 6 * (log10 C(m, 4) + log10 items + log10 abilities + log10 spreads)``,
    with non-integer average move counts handled through the gamma function.
    """
    if usage.species < usage.team_size:
        raise ValueError(f"species pool {usage.species} smaller than team size {usage.team_size}")
    n = usage.team_size
    terms = {
        "species": math.log10(math.comb(usage.species, n)),
        "moves": n * _log10_choose_real(usage.moves, usage.moves_per_set),
    }
    for name in ("items", "abilities", "spreads"):
        v = getattr(usage, name)
        if v is not None:
            if v <= 0:
                raise ValueError(f"{name} must be positive")
            terms[name] = n * math.log10(v)
    return sum(terms.values()), terms


def usage_cdf(usage: Sequence[tuple[str, float]]) -> list[tuple[str, float]]:
    """Cumulative share of total usage covered by the top-k entries, k = 1..n."""
    if any(f < 0 for _, f in usage):
        raise ValueError("usage fractions must be non-negative")
    total = math.fsum(f for _, f in usage)
    if total <= 0:
        raise ValueError("usage is all zero")
    ordered = sorted(usage, key=lambda x: (-x[1], x[0]))
    out, acc = [], 0.0
    for name, f in ordered:
        acc += f
        out.append((name, acc / total))
    out[-1] = (out[-1][0], 1.0)
    return out


def format_report(report: StateSpaceReport, exact_digits_limit: int = 60) -> str:
    """Named factors with exact values (when short enough) and log10, then the totals."""
    lines = [f"# state space: {report.label}", "factor\tlog10\texact"]
    for section, factors in (("team", report.team_factors), ("battle", report.battle_factors)):
        for name, c in factors.items():
            digits = len(str(c.value))
            exact = str(c.value) if digits <= exact_digits_limit else f"<{digits} digits>"
            lines.append(f"{section}.{name}\t{c.log10:.4f}\t{exact}")
    lines.append(f"team_space_log10\t{report.team_space_log10:.4f}")
    if report.battle_factors:
        lines.append(f"battle_space_log10\t{report.battle_space_log10:.4f}")
    return "\n".join(lines) + "\n"


def summary_table(reports: Sequence[StateSpaceReport]) -> str:
    lines = ["format\tteam_space\tbattle_state_space"]
    for r in reports:
        lines.append(f"{r.label}\t~10^{round(r.team_space_log10)}\t~10^{round(r.battle_space_log10)}")
    return "\n".join(lines) + "\n"


def headline_numbers() -> dict[str, int]:
    """The exact integers quoted in the derivation, recomputed."""
    gen1_vol = volatile_count(Ruleset.GEN1OU)
    return {
        "ev_spreads": ev_spread_count().value,
        "stars_and_bars_133_6": choose(133, 6).value,
        "capped_term_69_6": choose(69, 6).value,
        "gen9_species": choose(1329, 6).value,
        "gen9_moveset_base": choose(375, 4).value,
        "natures": 21 ** 6,
        "items": 248 ** 6,
        "tera": 19 ** 6,
        "gen1_species": choose(151, 6).value,
        "gen1_moveset_base": choose(164, 4).value,
        "gen1_volatiles": gen1_vol.total.value,
        "side_conditions": side_condition_count(Ruleset.GEN9OU).value,
        "pseudo_weather": pseudo_weather_count().value,
    }
