import json
from pathlib import Path

import pytest

from historiographer.cli import main
from historiographer.history import SearchHistory, save_histories


@pytest.fixture
def plan_file(tmp_path):
    out = tmp_path / "plan.json"
    assert main(["plan", "bundled", "--mass", "0.9", "-o", str(out)]) == 0
    return out


def run(args):
    return main([str(a) for a in args])


class TestPlan:
    def test_bundled_seed_band(self, tmp_path, plan_file):
        seeds = (tmp_path / "plan.seeds.txt").read_text().splitlines()
        assert 100 <= len(seeds) <= 150
        assert (tmp_path / "plan.stats2.csv").is_file()
        assert (tmp_path / "plan.stats3.csv").is_file()
        manifest = json.loads((tmp_path / "plan.manifest.json").read_text())
        assert manifest["subcommand"] == "plan"
        assert manifest["config"]["mass"] == 0.9

    def test_mass_one_bounded(self, tmp_path):
        out = tmp_path / "full.json"
        assert run(["plan", "bundled", "--mass", "1.0", "--length", "2", "-o", out]) == 0
        seeds = (tmp_path / "full.seeds.txt").read_text().splitlines()
        assert len(seeds) <= 676

    def test_missing_corpus_exit_2(self, tmp_path, capsys):
        rc = run(["plan", tmp_path / "nope.txt", "-o", tmp_path / "p.json"])
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestReconstruct:
    def test_appendix_style_fixture(self, tmp_path):
        hist = SearchHistory(user_id="author")
        hist.insert_search("privacy", 100, "http://privacy.org")
        hist.insert_search(
            "privacy enhancing technologies symposium 2010", 110,
            "http://petsymposium.org/2010/",
        )
        hist.insert_search("pets 10", 120)
        hist.insert_search("pets 2010", 130, "http://petsymposium.org/2010/")
        hist_file = tmp_path / "hist.jsonl"
        save_histories([hist], hist_file)

        corpus_file = tmp_path / "corpus.txt"
        corpus_file.write_text(
            "privacy\nprivacy enhancing technologies symposium 2010\n"
            "pets 2010\npets 10\npeople\n"
        )
        plan_out = tmp_path / "plan.json"
        assert run([
            "plan", corpus_file, "--mass", "1.0",
            "--alphabet", "abcdefghijklmnopqrstuvwxyz0123456789 ",
            "-o", plan_out,
        ]) == 0
        out = tmp_path / "result.json"
        assert run(["reconstruct", hist_file, plan_out, "-o", out]) == 0
        result = json.loads(out.read_text())
        assert result["recovered"] == [
            "pets 2010",
            "privacy",
            "privacy enhancing technologies symposium 2010",
        ]
        report = (tmp_path / "result.report.csv").read_text().splitlines()
        assert report[1].startswith("author,4,3,3,1.00,")

    def test_empty_history(self, tmp_path, plan_file):
        hist_file = tmp_path / "hist.jsonl"
        save_histories([SearchHistory(user_id="u")], hist_file)
        out = tmp_path / "r.json"
        assert run(["reconstruct", hist_file, plan_file, "-o", out]) == 0
        assert json.loads(out.read_text())["recovered"] == []

    def test_budget_monotone(self, tmp_path, plan_file, wordlist):
        from historiographer.harness import gen_synthetic

        histories = gen_synthetic(1, 60, 0.8, wordlist, seed=11)
        hist_file = tmp_path / "hist.jsonl"
        save_histories(histories.values(), hist_file)
        recovered = {}
        for budget in (10, 100):
            out = tmp_path / f"r{budget}.json"
            assert run([
                "reconstruct", hist_file, plan_file, "--budget", budget, "-o", out,
            ]) == 0
            recovered[budget] = set(json.loads(out.read_text())["recovered"])
        assert recovered[10] <= recovered[100]

    def test_missing_plan_exit_2(self, tmp_path):
        hist_file = tmp_path / "hist.jsonl"
        save_histories([SearchHistory(user_id="u")], hist_file)
        rc = run(["reconstruct", hist_file, tmp_path / "no.json", "-o", tmp_path / "r.json"])
        assert rc == 2


class TestEval:
    def test_calibrated_fixture_default_config(self, tmp_path):
        from importlib import resources

        fixture = resources.files("historiographer.data").joinpath("volunteers.jsonl")
        out = tmp_path / "report.json"
        assert run(["eval", str(fixture), "-o", out]) == 0
        report = json.loads(out.read_text())
        assert abs(report["mean_recall"] - 0.65) <= 0.01
        assert report["mean_requests"] < 676

    def test_worker_determinism(self, tmp_path, wordlist):
        from historiographer.harness import gen_synthetic

        histories = gen_synthetic(6, (5, 30), 0.6, wordlist, seed=12)
        dataset = tmp_path / "d.jsonl"
        save_histories((histories[u] for u in sorted(histories)), dataset)
        outputs = []
        for workers in (1, 8):
            out = tmp_path / f"rep{workers}.json"
            assert run([
                "eval", dataset, "--workers", workers, "--seed", 0, "-o", out,
            ]) == 0
            outputs.append(out.read_bytes())
            csv_out = tmp_path / f"rep{workers}.per_user.csv"
            outputs.append(csv_out.read_bytes())
        assert outputs[0] == outputs[2]
        assert outputs[1] == outputs[3]

    def test_aol_format_ingests(self, tmp_path):
        dataset = tmp_path / "log.tsv"
        dataset.write_text(
            "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n"
            "1\tprivacy\t2006-03-01 10:00:00\t1\thttp://privacy.org\n"
            "2\tmalformed row\n"
            "2\tmaps\t2006-03-02 09:00:00\t\t\n"
        )
        out = tmp_path / "rep.json"
        assert run(["eval", dataset, "-o", out]) == 0
        report = json.loads(out.read_text())
        assert report["users"] == 2


class TestAudit:
    def _write_trace(self, tmp_path, rows):
        path = tmp_path / "trace.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        return path

    def test_fixture_counts_and_services(self, tmp_path):
        trace = self._write_trace(tmp_path, [
            {"time": 1, "scheme": "http", "client_ip": "10.0.0.1",
             "host": "www.google.com", "path": "/search",
             "headers": {"Cookie": ["SID=s1"]}, "body_flags": ["has_history_link"]},
            {"time": 2, "scheme": "http", "client_ip": "10.0.0.2",
             "host": "www.google.com", "path": "/search",
             "headers": {"Cookie": ["NID=n1"]}, "body_flags": []},
        ])
        out = tmp_path / "audit.json"
        assert run(["audit", trace, "-o", out]) == 0
        audit = json.loads(out.read_text())
        assert audit["user_counts"] == {
            "signed_in": 1, "anonymous": 1, "history_enabled": 1,
        }
        (account,) = audit["accounts"]
        assert "Search" in account["services_accessible"]
        assert "Gmail" not in account["services_accessible"]
        assert "Docs" not in account["services_accessible"]

    def test_ip_binding_empties_access(self, tmp_path):
        trace = self._write_trace(tmp_path, [
            {"time": 1, "scheme": "http", "client_ip": "10.0.0.1",
             "host": "www.google.com", "path": "/search",
             "headers": {"Cookie": ["SID=s1"]}, "body_flags": []},
        ])
        out = tmp_path / "audit.json"
        assert run([
            "audit", trace, "--enforce-ip-binding", "--replay-ip", "9.9.9.9",
            "-o", out,
        ]) == 0
        audit = json.loads(out.read_text())
        assert audit["accounts"][0]["services_accessible"] == []

    def test_missing_trace_exit_2(self, tmp_path):
        assert run(["audit", tmp_path / "no.jsonl", "-o", tmp_path / "a.json"]) == 2


class TestGen:
    def test_deterministic_and_manifest(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        for out in (a, b):
            assert run([
                "gen", "--users", 5, "--entries", "3:10",
                "--clicked-fraction", 0.5, "--seed", 1, "-o", out,
            ]) == 0
        assert a.read_bytes() == b.read_bytes()
        manifest = json.loads((tmp_path / "a.manifest.json").read_text())
        assert manifest["config"]["seed"] == 1

    def test_zero_clicked(self, tmp_path):
        from historiographer.history import load_histories

        out = tmp_path / "d.jsonl"
        assert run([
            "gen", "--users", 3, "--entries", "5", "--clicked-fraction", 0,
            "--seed", 2, "-o", out,
        ]) == 0
        assert all(h.n_c == 0 for h in load_histories(out).values())


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])
    assert exc_info.value.code == 0
