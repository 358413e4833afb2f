"""Ground-truth search histories: per-user entries with click state and timestamps."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

DEFAULT_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789 "

_WS_RUN = re.compile(r"\s+")


class HistoryError(Exception):
    pass


class HistoryDisabledError(HistoryError):
    """Raised when inserting into a history with history_enabled=False."""


class EmptyQueryError(HistoryError):
    """Raised when a query normalizes to the empty string."""


def normalize(raw: str, alphabet: str = DEFAULT_ALPHABET) -> str:
    """Canonicalize a query: lowercase, restrict to the alphabet, collapse whitespace.

    Returns "" for inputs that normalize to nothing; callers treat that as
    "no entry".
    """
    lowered = raw.lower()
    keep_space = " " in alphabet
    kept = "".join(
        c for c in lowered if c in alphabet or (keep_space and c.isspace())
    )
    return _WS_RUN.sub(" ", kept).strip()


@dataclass
class HistoryEntry:
    query: str
    clicked: bool
    first_time: int
    last_time: int
    count: int
    clicked_urls: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "clicked": self.clicked,
            "first_time": self.first_time,
            "last_time": self.last_time,
            "count": self.count,
            "clicked_urls": list(self.clicked_urls),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryEntry":
        return cls(
            query=d["query"],
            clicked=bool(d["clicked"]),
            first_time=int(d["first_time"]),
            last_time=int(d["last_time"]),
            count=int(d["count"]),
            clicked_urls=list(d.get("clicked_urls", [])),
        )


@dataclass
class SearchHistory:
    """All searches recorded for one user, keyed by normalized query.

    Repeated searches of the same normalized query merge into one entry:
    counts sum, the time range widens and clicked_urls accumulate.
    """

    user_id: str
    history_enabled: bool = True
    entries: Dict[str, HistoryEntry] = field(default_factory=dict)
    alphabet: str = DEFAULT_ALPHABET

    @property
    def n_h(self) -> int:
        return len(self.entries)

    @property
    def n_c(self) -> int:
        return sum(1 for e in self.entries.values() if e.clicked)

    def clicked_queries(self) -> List[str]:
        return [q for q, e in self.entries.items() if e.clicked]

    def insert_search(self, raw_query: str, time: int, clicked_url: Optional[str] = None) -> None:
        if not self.history_enabled:
            raise HistoryDisabledError(f"history disabled for user {self.user_id!r}")
        query = normalize(raw_query, self.alphabet)
        if not query:
            raise EmptyQueryError(f"query {raw_query!r} normalizes to nothing")
        entry = self.entries.get(query)
        if entry is None:
            self.entries[query] = HistoryEntry(
                query=query,
                clicked=clicked_url is not None,
                first_time=time,
                last_time=time,
                count=1,
                clicked_urls=[clicked_url] if clicked_url else [],
            )
        else:
            entry.count += 1
            entry.first_time = min(entry.first_time, time)
            entry.last_time = max(entry.last_time, time)
            if clicked_url is not None:
                entry.clicked = True
                if clicked_url not in entry.clicked_urls:
                    entry.clicked_urls.append(clicked_url)

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "history_enabled": self.history_enabled,
            "entries": [e.to_dict() for e in sorted(self.entries.values(), key=lambda e: e.query)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchHistory":
        hist = cls(user_id=d["user_id"], history_enabled=bool(d["history_enabled"]))
        for ed in d.get("entries", []):
            entry = HistoryEntry.from_dict(ed)
            hist.entries[entry.query] = entry
        return hist


def save_histories(histories: Iterable[SearchHistory], path) -> None:
    """Write one SearchHistory per line as JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for hist in histories:
            fh.write(json.dumps(hist.to_dict(), sort_keys=True) + "\n")


def load_histories(path) -> Dict[str, SearchHistory]:
    out: Dict[str, SearchHistory] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            hist = SearchHistory.from_dict(json.loads(line))
            out[hist.user_id] = hist
    return out
