"""Dataset ingestion, synthetic history generation, the brute-force
recoverability oracle, and batch attack simulation with aggregate reporting."""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .attack import AttackConfig, RecallReport, compute_recall, reconstruct, score
from .history import SearchHistory, normalize
from .oracle import MAX_HISTORY_SUGGESTIONS, RankingKey, default_ranking, suggest

AOL_COLUMNS = ["AnonID", "Query", "QueryTime", "ItemRank", "ClickURL"]


def bundled_volunteers() -> Dict[str, SearchHistory]:
    """The calibrated 12-user fixture shipped with the package."""
    from importlib import resources

    from .history import SearchHistory as _SH

    text = (
        resources.files("historiographer.data")
        .joinpath("volunteers.jsonl")
        .read_text()
    )
    out: Dict[str, SearchHistory] = {}
    for line in text.splitlines():
        if line.strip():
            hist = _SH.from_dict(json.loads(line))
            out[hist.user_id] = hist
    return out


class HarnessError(Exception):
    pass


class HeaderMismatchError(HarnessError):
    pass


def _parse_query_time(raw: str) -> int:
    dt = datetime.strptime(raw.strip(), "%Y-%m-%d %H:%M:%S")
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


def ingest_query_log_counted(path) -> Tuple[Dict[str, SearchHistory], int]:
    """Load an AOL-format TSV into per-user histories.

    Returns (histories, skipped_row_count). Malformed rows are skipped,
    never fatal; a row with a click URL counts as clicked even without an
    item rank.
    """
    histories: Dict[str, SearchHistory] = {}
    skipped = 0
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise HarnessError(f"cannot read {path}: {exc}") from exc
    with fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != AOL_COLUMNS:
            raise HeaderMismatchError(
                f"expected columns {AOL_COLUMNS}, got {header}"
            )
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(AOL_COLUMNS):
                skipped += 1
                continue
            anon_id, query, query_time, _item_rank, click_url = fields
            try:
                time = _parse_query_time(query_time)
            except ValueError:
                skipped += 1
                continue
            if not normalize(query):
                skipped += 1
                continue
            hist = histories.get(anon_id)
            if hist is None:
                hist = histories[anon_id] = SearchHistory(user_id=anon_id)
            hist.insert_search(query, time, click_url.strip() or None)
    return histories, skipped


def ingest_query_log(path) -> Dict[str, SearchHistory]:
    histories, _ = ingest_query_log_counted(path)
    return histories


def gen_synthetic(
    n_users: int,
    entries_per_user: Union[int, Tuple[int, int]],
    clicked_fraction: float,
    vocabulary: Sequence[str],
    seed: int,
    time_range: Tuple[int, int] = (1_000_000, 2_000_000),
) -> Dict[str, SearchHistory]:
    """Reproducible synthetic datasets: queries drawn from the vocabulary
    with Zipf-like weights (1/rank)."""
    if not 0 <= clicked_fraction <= 1:
        raise HarnessError(f"clicked_fraction must be in [0, 1], got {clicked_fraction}")
    rng = random.Random(seed)
    weights = [1.0 / (i + 1) for i in range(len(vocabulary))]
    if isinstance(entries_per_user, int):
        low = high = entries_per_user
    else:
        low, high = entries_per_user
    histories: Dict[str, SearchHistory] = {}
    for i in range(n_users):
        user_id = f"user{i:04d}"
        hist = SearchHistory(user_id=user_id)
        n_entries = rng.randint(low, high)
        queries = rng.choices(vocabulary, weights=weights, k=n_entries)
        for query in queries:
            time = rng.randint(*time_range)
            clicked = rng.random() < clicked_fraction
            url = f"http://example.com/{query.replace(' ', '-')}" if clicked else None
            hist.insert_search(query, time, url)
        histories[user_id] = hist
    return histories


def brute_force_recoverable(
    history: SearchHistory,
    ranking: RankingKey = default_ranking,
    horizon: Optional[int] = None,
    now: Optional[int] = None,
) -> Set[str]:
    """Ground truth for recoverability, by direct enumeration.

    A clicked query is recoverable iff some prefix of it (length >= 2) ranks
    it in the top-3 among clicked queries sharing that prefix. No planner,
    no budget.
    """
    clicked = [e for e in history.entries.values() if e.clicked]
    if horizon is not None:
        cutoff = (now if now is not None else 0) - horizon
        clicked = [e for e in clicked if e.last_time >= cutoff]
    recoverable: Set[str] = set()
    for entry in clicked:
        for k in range(2, len(entry.query) + 1):
            prefix = entry.query[:k]
            matching = sorted(
                (e for e in clicked if e.query.startswith(prefix)), key=ranking
            )
            if entry.query in {
                e.query for e in matching[:MAX_HISTORY_SUGGESTIONS]
            }:
                recoverable.add(entry.query)
                break
    return recoverable


@dataclass
class AggregateReport:
    users: int
    mean_recall: float
    mean_requests: float
    per_user: List[RecallReport]
    failures: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "users": self.users,
            "mean_recall": self.mean_recall,
            "mean_requests": self.mean_requests,
            "per_user": [
                {
                    "user_id": r.user_id,
                    "n_h": r.n_h,
                    "n_c": r.n_c,
                    "n_s": r.n_s,
                    "recall": r.recall,
                    "n_requests": r.requests,
                }
                for r in self.per_user
            ],
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _attack_user(hist: SearchHistory, config: AttackConfig, ranking: RankingKey) -> RecallReport:
    def oracle(prefix: str):
        return suggest(hist, prefix, ranking=ranking)

    result = reconstruct(oracle, config)
    return score(result, hist)


def run_batch(
    histories: Dict[str, SearchHistory],
    config: AttackConfig,
    workers: int = 1,
    ranking: RankingKey = default_ranking,
) -> AggregateReport:
    """Reconstruct and score every history. Output is identical at any
    worker count: users are processed independently and aggregated in
    sorted user order."""
    if not histories:
        raise HarnessError("no histories to evaluate")
    user_ids = sorted(histories)
    reports: Dict[str, RecallReport] = {}
    failures: Dict[str, str] = {}

    def work(user_id: str):
        return user_id, _attack_user(histories[user_id], config, ranking)

    if workers <= 1:
        for user_id in user_ids:
            try:
                _, report = work(user_id)
                reports[user_id] = report
            except Exception as exc:
                failures[user_id] = str(exc)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {uid: pool.submit(work, uid) for uid in user_ids}
            for user_id in user_ids:
                try:
                    _, report = futures[user_id].result()
                    reports[user_id] = report
                except Exception as exc:
                    failures[user_id] = str(exc)

    per_user = [reports[uid] for uid in user_ids if uid in reports]
    scored = [r for r in per_user if r.n_c > 0]
    mean_recall = sum(r.recall for r in scored) / len(scored) if scored else 0.0
    mean_requests = (
        sum(r.requests for r in per_user) / len(per_user) if per_user else 0.0
    )
    return AggregateReport(
        users=len(per_user),
        mean_recall=mean_recall,
        mean_requests=mean_requests,
        per_user=per_user,
        failures=failures,
    )


def recall_curve(
    histories: Dict[str, SearchHistory],
    config: AttackConfig,
    budgets: Sequence[int] = (110, 440, 2000),
    workers: int = 1,
    ranking: RankingKey = default_ranking,
) -> List[dict]:
    """Mean recall at several request budgets; reported, not asserted."""
    points = []
    for budget in budgets:
        bounded = AttackConfig(
            plan=config.plan,
            budget=budget,
            max_depth=config.max_depth,
            descent_threshold=config.descent_threshold,
            frontier=config.frontier,
        )
        report = run_batch(histories, bounded, workers=workers, ranking=ranking)
        points.append(
            {
                "budget": budget,
                "mean_recall": report.mean_recall,
                "mean_requests": report.mean_requests,
            }
        )
    return points
