"""Reconstruction engine: drives the suggestion endpoint with a planned,
budgeted, adaptive prefix schedule and assembles the inferred history."""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Set, Tuple

from .history import SearchHistory
from .oracle import MAX_HISTORY_SUGGESTIONS, SuggestionResponse
from .planner import PrefixPlan

UNLIMITED = None

# An oracle is anything that answers a prefix with a SuggestionResponse.
SuggestFn = Callable[[str], SuggestionResponse]


class AttackError(Exception):
    pass


class ReconstructionAborted(AttackError):
    """Oracle failure mid-run; carries the partial result."""

    def __init__(self, message: str, partial: "ReconstructionResult"):
        super().__init__(message)
        self.partial = partial


@dataclass
class AttackConfig:
    plan: PrefixPlan
    budget: Optional[int] = UNLIMITED
    max_depth: Optional[int] = UNLIMITED
    descent_threshold: int = MAX_HISTORY_SUGGESTIONS
    frontier: str = "priority"  # or "level"

    def __post_init__(self):
        if self.descent_threshold > MAX_HISTORY_SUGGESTIONS:
            raise AttackError(
                f"descent_threshold {self.descent_threshold} exceeds the "
                f"{MAX_HISTORY_SUGGESTIONS}-suggestion cap"
            )
        if self.budget is not None and self.budget < 1:
            raise AttackError("budget must be >= 1")
        if self.frontier not in ("priority", "level"):
            raise AttackError(f"unknown frontier discipline {self.frontier!r}")


@dataclass
class ReconstructionResult:
    recovered: Set[str] = field(default_factory=set)
    request_log: List[Tuple[str, int]] = field(default_factory=list)
    frontier_exhausted: bool = False

    @property
    def requests_used(self) -> int:
        return len(self.request_log)

    def to_json(self) -> str:
        return json.dumps(
            {
                "recovered": sorted(self.recovered),
                "requests_used": self.requests_used,
                "request_log": [[p, c] for p, c in self.request_log],
                "frontier_exhausted": self.frontier_exhausted,
            },
            sort_keys=True,
        )


def reconstruct(oracle: SuggestFn, config: AttackConfig) -> ReconstructionResult:
    """Run the planned descent.

    Frontier discipline "priority": global max-priority order by corpus count,
    shorter prefixes first on ties, then lexicographic. "level": strict
    level order (all shorter prefixes before any longer one), frequency-ordered
    within a level. A prefix saturating the history cap is expanded one
    character deeper; no prefix is ever requested twice.
    """
    plan = config.plan
    if not plan.seeds:
        raise AttackError("plan has no seeds")

    def priority(prefix: str) -> Tuple:
        count = plan.seed_count(prefix)
        if config.frontier == "level":
            return (len(prefix), -count, prefix)
        return (-count, len(prefix), prefix)

    heap: List[Tuple[Tuple, str]] = [(priority(p), p) for p in plan.seeds]
    heapq.heapify(heap)
    requested: Set[str] = set()
    result = ReconstructionResult()

    while heap:
        if config.budget is not None and result.requests_used >= config.budget:
            return result
        _, prefix = heapq.heappop(heap)
        if prefix in requested:
            continue
        requested.add(prefix)
        try:
            response = oracle(prefix)
        except Exception as exc:
            raise ReconstructionAborted(str(exc), result) from exc
        result.request_log.append((prefix, response.history_count))
        result.recovered.update(response.history_texts())
        if response.history_count == config.descent_threshold and (
            config.max_depth is None or len(prefix) < config.max_depth
        ):
            for child in plan.extend(prefix):
                if child not in requested:
                    heapq.heappush(heap, (priority(child), child))
    result.frontier_exhausted = True
    return result


@dataclass
class RecallReport:
    user_id: str
    n_h: int
    n_c: int
    n_s: int
    recall: float
    requests: int

    CSV_HEADER = ["user_id", "n_h", "n_c", "n_s", "recall", "n_requests"]

    def csv_row(self) -> List[str]:
        return [
            self.user_id,
            str(self.n_h),
            str(self.n_c),
            str(self.n_s),
            format_recall(self.recall),
            str(self.requests),
        ]


def format_recall(recall: float) -> str:
    """Two decimal places, truncated toward zero (0.6968 displays as 0.69).

    Stored values keep full precision; truncation happens only here.
    """
    from decimal import ROUND_DOWN, Decimal

    return str(Decimal(repr(recall)).quantize(Decimal("0.01"), rounding=ROUND_DOWN))


def compute_recall(n_c: int, n_s: int) -> float:
    """Recovered clicked queries over all clicked queries; 0 when none clicked."""
    if n_c == 0:
        return 0.0
    return n_s / n_c


def score(result: ReconstructionResult, truth: SearchHistory) -> RecallReport:
    n_c = truth.n_c
    n_s = len(result.recovered)
    return RecallReport(
        user_id=truth.user_id,
        n_h=truth.n_h,
        n_c=n_c,
        n_s=n_s,
        recall=compute_recall(n_c, n_s),
        requests=result.requests_used,
    )


def write_reports_csv(reports: List[RecallReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RecallReport.CSV_HEADER)
        for report in reports:
            writer.writerow(report.csv_row())
