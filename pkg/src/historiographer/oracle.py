"""Provider-side interfaces: prefix suggestions, targeted result checks,
and the two whole-history dump channels (maps page, mobile page)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

from .history import HistoryEntry, SearchHistory, normalize

MAX_HISTORY_SUGGESTIONS = 3
MAX_SUGGESTIONS = 10
MIN_PREFIX_LEN = 2

DEFAULT_MOBILE_PATTERN = "iPhone"


class OracleError(Exception):
    pass


class PrefixTooShortError(OracleError):
    """Suggestions are only served for prefixes of length >= 2."""


class UnnormalizedPrefixError(OracleError):
    pass


class InvalidSessionError(OracleError):
    """The presented session token does not authenticate the account."""


class Origin(Enum):
    HISTORY = "history"
    GENERIC = "generic"


@dataclass(frozen=True)
class Suggestion:
    text: str
    origin: Origin


@dataclass
class SuggestionResponse:
    prefix: str
    suggestions: List[Suggestion]

    @property
    def history_count(self) -> int:
        return sum(1 for s in self.suggestions if s.origin is Origin.HISTORY)

    def history_texts(self) -> List[str]:
        return [s.text for s in self.suggestions if s.origin is Origin.HISTORY]

    def to_json(self) -> str:
        return json.dumps(
            {
                "prefix": self.prefix,
                "suggestions": [
                    {"text": s.text, "from_history": s.origin is Origin.HISTORY}
                    for s in self.suggestions
                ],
            },
            sort_keys=True,
        )


# Ranking policy: maps an entry to a sort key, best first. The provider's real
# ordering is unknown, so it is pluggable.
RankingKey = Callable[[HistoryEntry], Tuple]


def default_ranking(entry: HistoryEntry) -> Tuple:
    return (-entry.count, -entry.last_time, entry.query)


def suggest(
    history: SearchHistory,
    prefix: str,
    generic_corpus: Sequence[str] = (),
    ranking: RankingKey = default_ranking,
    horizon: Optional[int] = None,
    now: Optional[int] = None,
) -> SuggestionResponse:
    """Answer one autocomplete request.

    History suggestions are the top-3 clicked entries whose query starts with
    the prefix, under the ranking policy. Generic suggestions fill the list up
    to 10 from the ranked corpus. With a horizon set, entries whose last_time
    is older than now - horizon are no longer served.
    """
    if len(prefix) < MIN_PREFIX_LEN:
        raise PrefixTooShortError(f"prefix {prefix!r} shorter than {MIN_PREFIX_LEN}")
    # A valid prefix is any leading slice of a normalized query, so a single
    # trailing space is legal mid-word-boundary.
    if normalize(prefix, history.alphabet) != prefix.rstrip(" ") or prefix.endswith("  "):
        raise UnnormalizedPrefixError(f"prefix {prefix!r} is not normalized")

    candidates = [
        e
        for e in history.entries.values()
        if e.clicked and e.query.startswith(prefix)
    ]
    if horizon is not None:
        cutoff = (now if now is not None else 0) - horizon
        candidates = [e for e in candidates if e.last_time >= cutoff]
    candidates.sort(key=ranking)
    picked = [
        Suggestion(e.query, Origin.HISTORY)
        for e in candidates[:MAX_HISTORY_SUGGESTIONS]
    ]

    seen = {s.text for s in picked}
    for q in generic_corpus:
        if len(picked) >= MAX_SUGGESTIONS:
            break
        if q.startswith(prefix) and q not in seen:
            picked.append(Suggestion(q, Origin.GENERIC))
            seen.add(q)
    return SuggestionResponse(prefix=prefix, suggestions=picked)


@dataclass(frozen=True)
class CustomizationMarker:
    url: str
    visit_count: int
    last_visit: int


def targeted_check(history: SearchHistory, probe_result_urls: Sequence[str]) -> List[CustomizationMarker]:
    """Return one marker per probe URL previously clicked from this history.

    An empty list means no customization link would appear on the result page.
    """
    markers = []
    for url in probe_result_urls:
        hits = [e for e in history.entries.values() if url in e.clicked_urls]
        if hits:
            markers.append(
                CustomizationMarker(
                    url=url,
                    visit_count=sum(e.count for e in hits),
                    last_visit=max(e.last_time for e in hits),
                )
            )
    return markers


@dataclass
class MapsHistoryEntry:
    id: int
    address: str
    label: str
    created: int
    count: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "address": self.address,
            "label": self.label,
            "created": self.created,
            "count": self.count,
        }


@dataclass
class Session:
    """Server-side view of which session token authenticates an account."""

    sid: str

    def check(self, token: Optional[str]) -> None:
        if token != self.sid:
            raise InvalidSessionError("session token rejected")


def maps_dump(
    maps_history: Sequence[MapsHistoryEntry],
    session: Session,
    token: Optional[str],
) -> List[dict]:
    """The maps page embeds the full location history in one response."""
    session.check(token)
    return [e.to_dict() for e in maps_history]


def mobile_dump(
    history: SearchHistory,
    user_agent: str,
    session: Session,
    token: Optional[str],
    mobile_pattern: str = DEFAULT_MOBILE_PATTERN,
) -> Optional[List[str]]:
    """Mobile page: the whole history, clicked or not, in one response.

    Returns None (refusal) when the user agent does not look mobile.
    """
    session.check(token)
    if mobile_pattern not in user_agent:
        return None
    return sorted(history.entries)
