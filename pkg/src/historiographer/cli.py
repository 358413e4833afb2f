"""Command-line pipeline: plan building, single-user reconstruction, batch
evaluation, trace auditing and synthetic-data generation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .attack import AttackConfig, reconstruct, score, write_reports_csv
from .cookies import (
    audit_trace,
    bundled_catalog,
    count_users,
    load_catalog,
    load_trace,
    write_audit_csv,
)
from .harness import gen_synthetic, ingest_query_log_counted, run_batch
from .history import load_histories, save_histories
from .planner import PrefixPlan, build_plan, bundled_wordlist, load_corpus

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


class InputError(Exception):
    pass


def _write_manifest(output: Path, subcommand: str, config: dict) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "version": __version__,
    }
    path = output.with_suffix("")
    manifest_path = Path(str(path) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _load_corpus_arg(corpus: str):
    if corpus == "bundled":
        return bundled_wordlist()
    path = Path(corpus)
    if not path.is_file():
        raise InputError(f"corpus file not found: {corpus}")
    return load_corpus(path)


def cmd_plan(args) -> int:
    corpus = _load_corpus_arg(args.corpus)
    plan = build_plan(
        corpus,
        mass_fraction=args.mass,
        lengths=(args.length, args.length + 1),
        alphabet=args.alphabet,
        selection=args.selection,
    )
    out = Path(args.output)
    plan.save(out)
    stem = out.with_suffix("")
    for n, stats in plan.stats_by_length.items():
        stats.write_csv(Path(f"{stem}.stats{n}.csv"))
    Path(f"{stem}.seeds.txt").write_text("\n".join(plan.seeds) + "\n")
    _write_manifest(
        out,
        "plan",
        {
            "corpus": args.corpus,
            "mass": args.mass,
            "length": args.length,
            "alphabet": args.alphabet,
            "selection": args.selection,
            "output": str(out),
            "seed": None,
        },
    )
    return EXIT_OK


def _load_single_history(path: str, user: str | None):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"history file not found: {path}")
    histories = load_histories(p)
    if not histories:
        raise InputError(f"no histories in {path}")
    if user is not None:
        if user not in histories:
            raise InputError(f"user {user!r} not in {path}")
        return histories[user]
    return histories[sorted(histories)[0]]


def cmd_reconstruct(args) -> int:
    from .oracle import suggest

    hist = _load_single_history(args.history_file, args.user)
    plan_path = Path(args.plan_file)
    if not plan_path.is_file():
        raise InputError(f"plan file not found: {args.plan_file}")
    plan = PrefixPlan.load(plan_path)
    config = AttackConfig(
        plan=plan,
        budget=args.budget,
        max_depth=args.max_depth,
    )
    result = reconstruct(lambda prefix: suggest(hist, prefix), config)
    report = score(result, hist)
    out = Path(args.output)
    out.write_text(result.to_json() + "\n")
    stem = out.with_suffix("")
    write_reports_csv([report], Path(f"{stem}.report.csv"))
    _write_manifest(
        out,
        "reconstruct",
        {
            "history_file": args.history_file,
            "plan_file": args.plan_file,
            "user": args.user,
            "budget": args.budget,
            "max_depth": args.max_depth,
            "output": str(out),
            "seed": None,
        },
    )
    return EXIT_OK


def _load_dataset(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"dataset not found: {path}")
    with open(p, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("AnonID\t"):
        histories, _ = ingest_query_log_counted(p)
        return histories
    return load_histories(p)


def cmd_eval(args) -> int:
    histories = _load_dataset(args.dataset)
    if args.plan_file is not None:
        plan_path = Path(args.plan_file)
        if not plan_path.is_file():
            raise InputError(f"plan file not found: {args.plan_file}")
        plan = PrefixPlan.load(plan_path)
    else:
        plan = build_plan(bundled_wordlist(), mass_fraction=0.9)
    config = AttackConfig(plan=plan, budget=args.budget)
    report = run_batch(histories, config, workers=args.workers)
    out = Path(args.output)
    out.write_text(report.to_json() + "\n")
    stem = out.with_suffix("")
    write_reports_csv(report.per_user, Path(f"{stem}.per_user.csv"))
    _write_manifest(
        out,
        "eval",
        {
            "dataset": args.dataset,
            "plan_file": args.plan_file,
            "budget": args.budget,
            "workers": args.workers,
            "seed": args.seed,
            "output": str(out),
        },
    )
    return EXIT_OK


def cmd_audit(args) -> int:
    trace_path = Path(args.trace_file)
    if not trace_path.is_file():
        raise InputError(f"trace file not found: {args.trace_file}")
    trace = load_trace(trace_path)
    if args.catalog_file is not None:
        catalog_path = Path(args.catalog_file)
        if not catalog_path.is_file():
            raise InputError(f"catalog file not found: {args.catalog_file}")
        catalog = load_catalog(catalog_path)
    else:
        catalog = bundled_catalog()
    counts = count_users(trace)
    reports = audit_trace(
        trace,
        catalog,
        enforce_ip_binding=args.enforce_ip_binding,
        replay_ip=args.replay_ip,
    )
    out = Path(args.output)
    out.write_text(
        json.dumps(
            {
                "user_counts": counts,
                "accounts": [
                    {
                        "sid": r.sid,
                        "services_accessible": r.services_accessible,
                        "cookies_seen": r.cookies_seen,
                        "signed_in": r.signed_in,
                        "history_enabled": r.history_enabled,
                    }
                    for r in reports
                ],
            },
            sort_keys=True,
        )
        + "\n"
    )
    stem = out.with_suffix("")
    write_audit_csv(reports, catalog, Path(f"{stem}.services.csv"))
    _write_manifest(
        out,
        "audit",
        {
            "trace_file": args.trace_file,
            "catalog_file": args.catalog_file,
            "enforce_ip_binding": args.enforce_ip_binding,
            "replay_ip": args.replay_ip,
            "output": str(out),
            "seed": None,
        },
    )
    return EXIT_OK


def _parse_entries(raw: str):
    if ":" in raw:
        low, _, high = raw.partition(":")
        return (int(low), int(high))
    return int(raw)


def cmd_gen(args) -> int:
    if args.vocab is not None:
        vocabulary = _load_corpus_arg(args.vocab)
    else:
        vocabulary = bundled_wordlist()
    histories = gen_synthetic(
        n_users=args.users,
        entries_per_user=_parse_entries(args.entries),
        clicked_fraction=args.clicked_fraction,
        vocabulary=vocabulary,
        seed=args.seed,
    )
    out = Path(args.output)
    save_histories((histories[uid] for uid in sorted(histories)), out)
    _write_manifest(
        out,
        "gen",
        {
            "users": args.users,
            "entries": args.entries,
            "clicked_fraction": args.clicked_fraction,
            "seed": args.seed,
            "vocab": args.vocab,
            "output": str(out),
        },
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="historiographer",
        description="Search-history reconstruction and session-exposure audit toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="build a prefix plan from a reference corpus")
    p.add_argument("corpus", help="word-list path, or 'bundled'")
    p.add_argument("--mass", type=float, default=0.9)
    p.add_argument("--length", type=int, default=2)
    p.add_argument("--alphabet", default="abcdefghijklmnopqrstuvwxyz")
    p.add_argument("--selection", choices=["mass", "rank"], default="mass")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("reconstruct", help="reconstruct one user's history")
    p.add_argument("history_file")
    p.add_argument("plan_file")
    p.add_argument("--user")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="batch attack simulation over a dataset")
    p.add_argument("dataset", help="history JSON-lines or AOL-format TSV")
    p.add_argument("plan_file", nargs="?", default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="count users and audit hijack exposure")
    p.add_argument("trace_file")
    p.add_argument("catalog_file", nargs="?", default=None)
    p.add_argument("--enforce-ip-binding", action="store_true")
    p.add_argument("--replay-ip", default="")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--entries", default="20", help="count, or low:high range")
    p.add_argument("--clicked-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from .cookies import TraceError
    from .harness import HarnessError
    from .planner import EmptyCorpusError

    try:
        return args.func(args)
    except (
        InputError,
        FileNotFoundError,
        TraceError,
        HarnessError,
        EmptyCorpusError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
