"""Interval type-2 fuzzy inference over triples of normalised quanta.

Each linguistic term (low, medium, high) is an interval type-2 set whose
upper membership function is a triangle on [0, 1] and whose lower
membership function is the same triangle scaled by ``lower_scale``. A rule
base maps every combination of three input terms to an output term;
inference uses the minimum t-norm, Karnik-Mendel center-of-sets type
reduction and midpoint defuzzification.

All functions accept leading batch axes so one call can score many
triples at once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

TERMS = ("low", "medium", "high")


class NoRuleFired(ValueError):
    pass


class FuzzyConfigError(ValueError):
    pass


def triangle(x, left: float, apex: float, right: float):
    """Triangular membership; a zero-width side is a vertical edge."""
    x = np.asarray(x, dtype=float)
    rise = np.where(apex > left, (x - left) / (apex - left if apex > left else 1.0), 1.0)
    fall = np.where(right > apex, (right - x) / (right - apex if right > apex else 1.0), 1.0)
    inside = (x >= left) & (x <= right)
    return np.where(inside, np.where(x <= apex, rise, fall), 0.0).clip(0.0, 1.0)


@dataclass(frozen=True)
class IT2Set:
    term: str
    left: float
    apex: float
    right: float
    lower_scale: float = 0.8

    def __post_init__(self):
        if self.term not in TERMS:
            raise ValueError(f"unknown term {self.term!r}")
        if not self.left <= self.apex <= self.right:
            raise ValueError(f"{self.term}: need left <= apex <= right")
        if not 0.0 < self.lower_scale <= 1.0:
            raise ValueError(f"{self.term}: lower_scale must be in (0, 1]")


def membership(s: IT2Set, x):
    """Return ``(lower, upper)`` membership grades of ``x`` in ``s``."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or not np.all(np.isfinite(x)):
        raise ValueError("membership input must lie in [0, 1]")
    upper = triangle(x, s.left, s.apex, s.right)
    return s.lower_scale * upper, upper


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[str, str, str]
    consequent: str


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[FuzzyRule, ...]
    consequent_centroids: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        seen = [r.antecedents for r in self.rules]
        combos = set(itertools.product(TERMS, repeat=3))
        if len(seen) != 27 or set(seen) != combos:
            raise ValueError("rule base must hold each of the 27 antecedent combinations once")
        for r in self.rules:
            if r.consequent not in TERMS:
                raise ValueError(f"unknown consequent {r.consequent!r}")
        for term, (lo, hi) in self.consequent_centroids.items():
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"centroid of {term!r} must satisfy 0 <= c_L <= c_R <= 1")

    def centroid_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        cl = np.array([self.consequent_centroids[r.consequent][0] for r in self.rules])
        cr = np.array([self.consequent_centroids[r.consequent][1] for r in self.rules])
        return cl, cr


def monotone_rules() -> tuple[FuzzyRule, ...]:
    """Consequent = rounded mean of the antecedent term indices."""
    rules = []
    for combo in itertools.product(TERMS, repeat=3):
        mean = sum(TERMS.index(t) for t in combo) / 3
        # mean is a multiple of 1/3, so half-way ties cannot occur
        rules.append(FuzzyRule(combo, TERMS[int(round(mean))]))
    return tuple(rules)


DEFAULT_MF = {"low": (0.0, 0.0, 0.5), "medium": (0.1, 0.5, 0.9), "high": (0.5, 1.0, 1.0)}
DEFAULT_LOWER_SCALE = 0.8
DEFAULT_CENTROIDS = {"low": (0.15, 0.25), "medium": (0.45, 0.55), "high": (0.75, 0.85)}


def fire_rule(rule: FuzzyRule, inputs) -> tuple:
    """Minimum t-norm over three ``(lower, upper)`` membership intervals."""
    lowers = [np.asarray(lo, dtype=float) for lo, _ in inputs]
    uppers = [np.asarray(up, dtype=float) for _, up in inputs]
    if len(lowers) != 3:
        raise ValueError("a rule takes three antecedent memberships")
    return np.minimum.reduce(lowers), np.minimum.reduce(uppers)


def _km_side(f_lo, f_up, c, left: bool):
    order = np.argsort(c, kind="stable")
    c = c[order]
    f_lo = f_lo[..., order]
    f_up = f_up[..., order]
    R = c.shape[-1]
    idx = np.arange(R)

    f = 0.5 * (f_lo + f_up)
    y = (f * c).sum(-1) / f.sum(-1)
    k = np.searchsorted(c, y, side="right")  # number of centroids <= y
    active = np.ones(np.shape(y), dtype=bool)
    for _ in range(R + 1):
        below = idx < k[..., None]
        w = np.where(below, f_up, f_lo) if left else np.where(below, f_lo, f_up)
        den = w.sum(-1)
        y_new = np.where(den > 0, (w * c).sum(-1) / np.where(den > 0, den, 1.0), y)
        k_new = np.searchsorted(c, y_new, side="right")
        # a switch point sitting on a centroid shared by several rules leaves
        # y unchanged up to rounding; treat that as converged too
        done = (k_new == k) | (np.abs(y_new - y) <= 1e-12)
        y = np.where(active, y_new, y)
        k = np.where(active, k_new, k)
        active = active & ~done
        if not active.any():
            break
    return y


def km_type_reduce(lower, upper, c_left, c_right):
    """Karnik-Mendel center-of-sets type reduction.

    Args:
        lower, upper: firing interval bounds, shape ``(..., R)``.
        c_left, c_right: consequent centroid interval of each rule, ``(R,)``.

    Returns:
        ``(y_left, y_right)``, the smallest and largest weighted average of
        the centroids over firing levels inside the firing intervals.

    Raises:
        NoRuleFired: if every upper firing level is zero (for any batch entry).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    c_left = np.asarray(c_left, dtype=float)
    c_right = np.asarray(c_right, dtype=float)
    if np.any(upper.sum(-1) <= 0):
        raise NoRuleFired("no rule fired")
    return _km_side(lower, upper, c_left, True), _km_side(lower, upper, c_right, False)


@dataclass(frozen=True)
class FuzzySystem:
    """Term sets plus rule base; the whole inference configuration."""

    sets: Mapping[str, IT2Set] = field(
        default_factory=lambda: {t: IT2Set(t, *DEFAULT_MF[t], DEFAULT_LOWER_SCALE) for t in TERMS}
    )
    rulebase: RuleBase = field(
        default_factory=lambda: RuleBase(monotone_rules(), dict(DEFAULT_CENTROIDS))
    )

    def firing_intervals(self, triples):
        """Lower and upper firing level of every rule, shape ``(..., 27)``.

        Same result as :func:`fire_rule` applied rule by rule, gathered in
        one pass.
        """
        triples = np.asarray(triples, dtype=float)
        if np.any((triples < 0.0) | (triples > 1.0)) or not np.all(np.isfinite(triples)):
            raise ValueError("membership input must lie in [0, 1]")
        left, apex, right, scale = self._term_arrays
        x = triples[..., None]
        # same arithmetic as triangle(), all terms at once
        rise = np.where(apex > left, (x - left) / np.where(apex > left, apex - left, 1.0), 1.0)
        fall = np.where(right > apex, (right - x) / np.where(right > apex, right - apex, 1.0), 1.0)
        inside = (x >= left) & (x <= right)
        up = np.where(inside, np.where(x <= apex, rise, fall), 0.0).clip(0.0, 1.0)
        lo = scale * up
        ante = self._antecedent_index
        pos = np.arange(3)
        return lo[..., pos, ante].min(-1), up[..., pos, ante].min(-1)

    @property
    def _term_arrays(self):
        sets = [self.sets[t] for t in TERMS]
        return tuple(np.array([getattr(st, f) for st in sets]) for f in ("left", "apex", "right", "lower_scale"))

    @property
    def _antecedent_index(self) -> np.ndarray:
        return np.array([[TERMS.index(t) for t in r.antecedents] for r in self.rulebase.rules])

    def type_reduce(self, triples):
        """``(y_left, y_right)`` per triple; NaN where no rule fires."""
        lower, upper = self.firing_intervals(triples)
        cl, cr = self.rulebase.centroid_arrays()
        fired = upper.sum(-1) > 0
        # give silent entries a dummy firing so the batch reduces in one pass
        upper = np.where(fired[..., None], upper, 1.0)
        lower = np.where(fired[..., None], lower, 1.0)
        yl, yr = km_type_reduce(lower, upper, cl, cr)
        return np.where(fired, yl, np.nan), np.where(fired, yr, np.nan)

    def infer_dod(self, triples):
        """Crisp degree of distribution in [0, 1] for each triple (0 if silent)."""
        triples = np.asarray(triples, dtype=float)
        if triples.shape[-1] != 3:
            raise ValueError("infer_dod expects triples")
        yl, yr = self.type_reduce(triples)
        dod = np.where(np.isnan(yl), 0.0, 0.5 * (yl + yr))
        return float(dod) if dod.ndim == 0 else dod


def infer_dod(system: FuzzySystem, triple):
    return system.infer_dod(triple)


# --- configuration ------------------------------------------------------------


def read_key_values(source) -> list[tuple[int, str, str]]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``source`` is a path or a string holding the file contents.
    """
    text = Path(source).read_text() if isinstance(source, Path) else str(source)
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise FuzzyConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        entries.append((lineno, key.strip(), value.strip()))
    return entries


def _floats(lineno, value, n):
    try:
        out = [float(v) for v in value.split(",")]
    except ValueError:
        raise FuzzyConfigError(f"line {lineno}: expected numbers, got {value!r}") from None
    if len(out) != n:
        raise FuzzyConfigError(f"line {lineno}: expected {n} comma-separated numbers")
    return out


def system_from_entries(entries) -> FuzzySystem:
    """Build a :class:`FuzzySystem` from ``(lineno, key, value)`` entries.

    Recognised keys: ``mf.<term> = left, apex, right``, ``lower_scale = s``,
    ``lower_scale.<term> = s`` and ``centroid.<term> = c_L, c_R``.
    """
    mf = dict(DEFAULT_MF)
    scale = {t: DEFAULT_LOWER_SCALE for t in TERMS}
    centroids = dict(DEFAULT_CENTROIDS)
    for lineno, key, value in entries:
        head, _, term = key.partition(".")
        if term and term not in TERMS:
            raise FuzzyConfigError(f"line {lineno}: unknown term {term!r}")
        if head == "mf" and term:
            mf[term] = tuple(_floats(lineno, value, 3))
        elif head == "lower_scale" and not term:
            s = _floats(lineno, value, 1)[0]
            scale = {t: s for t in TERMS}
        elif head == "lower_scale":
            scale[term] = _floats(lineno, value, 1)[0]
        elif head == "centroid" and term:
            centroids[term] = tuple(_floats(lineno, value, 2))
        else:
            raise FuzzyConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        sets = {t: IT2Set(t, *mf[t], scale[t]) for t in TERMS}
        return FuzzySystem(sets, RuleBase(monotone_rules(), centroids))
    except ValueError as exc:
        raise FuzzyConfigError(str(exc)) from None


def load_fuzzy_config(source) -> FuzzySystem:
    return system_from_entries(read_key_values(source))
