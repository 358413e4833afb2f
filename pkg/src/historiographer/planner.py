"""Attacker-side request planning: prefix frequency statistics over a
reference corpus, percentile-mass seed selection and frequency-ordered
extension for tree descent."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence

PLANNER_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class PlannerError(Exception):
    pass


class EmptyCorpusError(PlannerError):
    pass


@dataclass
class PrefixStats:
    length: int
    counts: Dict[str, int]
    alphabet: str

    def total(self) -> int:
        return sum(self.counts.values())

    def ordered(self) -> List[str]:
        """Canonical order: count descending, then lexicographic."""
        return sorted(self.counts, key=lambda p: (-self.counts[p], p))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["prefix", "count"])
            for p in self.ordered():
                writer.writerow([p, self.counts[p]])


def build_stats(corpus: Sequence[str], length: int, alphabet: str = PLANNER_ALPHABET) -> PrefixStats:
    """Tally the first `length` characters of every corpus item.

    Items shorter than `length`, or whose prefix uses characters outside the
    alphabet, do not contribute.
    """
    if length < 2:
        raise PlannerError(f"prefix length must be >= 2, got {length}")
    if not corpus:
        raise EmptyCorpusError("reference corpus is empty")
    allowed = set(alphabet)
    counts: Counter = Counter()
    for item in corpus:
        if len(item) < length:
            continue
        prefix = item[:length]
        if all(c in allowed for c in prefix):
            counts[prefix] += 1
    return PrefixStats(length=length, counts=dict(counts), alphabet=alphabet)


def select_mass(stats: PrefixStats, mass_fraction: float) -> List[str]:
    """Smallest frequency-ordered head of the prefix list covering the
    requested fraction of corpus items. mass_fraction=1 returns every
    nonzero prefix."""
    if not 0 < mass_fraction <= 1:
        raise PlannerError(f"mass_fraction must be in (0, 1], got {mass_fraction}")
    ordered = stats.ordered()
    target = mass_fraction * stats.total()
    picked: List[str] = []
    cum = 0
    for p in ordered:
        if cum >= target:
            break
        picked.append(p)
        cum += stats.counts[p]
    return picked


def select_rank(stats: PrefixStats, mass_fraction: float) -> List[str]:
    """Alternative reading of percentile selection: keep prefixes whose count
    reaches the mass_fraction quantile of the per-prefix count distribution."""
    if not 0 < mass_fraction <= 1:
        raise PlannerError(f"mass_fraction must be in (0, 1], got {mass_fraction}")
    values = sorted(stats.counts.values())
    if not values:
        return []
    idx = min(len(values) - 1, int(mass_fraction * len(values)))
    threshold = values[idx]
    return [p for p in stats.ordered() if stats.counts[p] >= threshold]


@dataclass
class PrefixPlan:
    seeds: List[str]
    mass_fraction: float
    stats_by_length: Dict[int, PrefixStats]
    alphabet: str
    unigram_order: str
    selection: str = "mass"
    filter_extensions: bool = True
    selected_by_length: Dict[int, set] = field(default_factory=dict)

    def extend(self, prefix: str) -> List[str]:
        """Children of a saturated prefix, one character longer, ordered by
        corpus frequency. Falls back to the whole alphabet (unigram order)
        past the deepest stats level."""
        child_len = len(prefix) + 1
        stats = self.stats_by_length.get(child_len)
        if stats is None:
            return [
                prefix + c
                for c in self.unigram_order
                if not (c == " " and prefix.endswith(" "))
            ]
        children = [
            p
            for p in stats.counts
            if p.startswith(prefix) and stats.counts[p] > 0
        ]
        if self.filter_extensions:
            selected = self.selected_by_length.get(child_len, set())
            children = [p for p in children if p in selected]
        children.sort(key=lambda p: (-stats.counts[p], p))
        return children

    def seed_count(self, prefix: str) -> int:
        stats = self.stats_by_length.get(len(prefix))
        if stats is None:
            return 0
        return stats.counts.get(prefix, 0)

    def to_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "mass_fraction": self.mass_fraction,
            "alphabet": self.alphabet,
            "unigram_order": self.unigram_order,
            "selection": self.selection,
            "filter_extensions": self.filter_extensions,
            "stats": {
                str(n): s.counts for n, s in sorted(self.stats_by_length.items())
            },
            "selected": {
                str(n): sorted(sel)
                for n, sel in sorted(self.selected_by_length.items())
            },
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "PrefixPlan":
        alphabet = d["alphabet"]
        stats_by_length = {
            int(n): PrefixStats(length=int(n), counts=dict(counts), alphabet=alphabet)
            for n, counts in d["stats"].items()
        }
        return cls(
            seeds=list(d["seeds"]),
            mass_fraction=d["mass_fraction"],
            stats_by_length=stats_by_length,
            alphabet=alphabet,
            unigram_order=d["unigram_order"],
            selection=d.get("selection", "mass"),
            filter_extensions=d.get("filter_extensions", True),
            selected_by_length={
                int(n): set(sel) for n, sel in d.get("selected", {}).items()
            },
        )

    @classmethod
    def load(cls, path) -> "PrefixPlan":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_plan(
    corpus: Sequence[str],
    mass_fraction: float = 0.9,
    lengths: Sequence[int] = (2, 3),
    alphabet: str = PLANNER_ALPHABET,
    selection: str = "mass",
    filter_extensions: bool = True,
) -> PrefixPlan:
    """Build seed list and per-length stats from a reference corpus."""
    if not corpus:
        raise EmptyCorpusError("reference corpus is empty")
    select = {"mass": select_mass, "rank": select_rank}[selection]
    stats_by_length = {}
    selected_by_length = {}
    for n in sorted(lengths):
        stats = build_stats(corpus, n, alphabet)
        stats_by_length[n] = stats
        selected_by_length[n] = set(select(stats, mass_fraction))

    unigrams: Counter = Counter()
    for item in corpus:
        for c in item:
            if c in alphabet:
                unigrams[c] += 1
    unigram_order = "".join(sorted(alphabet, key=lambda c: (-unigrams[c], c)))

    seed_len = min(lengths)
    seeds = select(stats_by_length[seed_len], mass_fraction)
    return PrefixPlan(
        seeds=seeds,
        mass_fraction=mass_fraction,
        stats_by_length=stats_by_length,
        alphabet=alphabet,
        unigram_order=unigram_order,
        selection=selection,
        filter_extensions=filter_extensions,
        selected_by_length=selected_by_length,
    )


def load_corpus(path) -> List[str]:
    """Word-list corpus: one item per line, normalized on load."""
    from .history import normalize

    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            item = normalize(line)
            if item:
                items.append(item)
    return items


def bundled_wordlist() -> List[str]:
    from .history import normalize

    text = resources.files("historiographer.data").joinpath("wordlist.txt").read_text()
    return [normalize(line) for line in text.splitlines() if normalize(line)]
