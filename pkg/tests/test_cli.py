import json
from pathlib import Path

import pytest

from resumekit import __version__
from resumekit.cli import main
from resumekit.schema import canonical_serialize, parse_record

from conftest import chat_response, make_record, serve_chat


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_record_pairs(directory: Path, n: int, raw_is_json: bool = True):
    """n canonical record/.txt pairs; raw text is the canonical JSON itself
    so an echo endpoint becomes a perfect parser."""
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        record = make_record(name=f"Person {i:03d}")
        blob = canonical_serialize(record)
        (directory / f"rec-{i:03d}.json").write_bytes(blob)
        raw = blob.decode("utf-8") if raw_is_json else f"resume text {i}"
        (directory / f"rec-{i:03d}.txt").write_text(raw, encoding="utf-8")


def build_dataset(tmp_path, capsys, n=20, seed=5) -> Path:
    src = tmp_path / "records"
    write_record_pairs(src, n)
    out = tmp_path / "dataset"
    code, _, err = run(
        ["build", "--real", str(src), "--out", str(out), "--seed", str(seed)], capsys
    )
    assert code == 0, err
    return out


class TestSynthCommand:
    def test_writes_pairs_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "synth"
        code, stdout, _ = run(
            ["synth", "--count", "8", "--seed", "3", "--out", str(out)], capsys
        )
        assert code == 0
        assert "generated 8 records" in stdout
        assert len(list(out.glob("synth-*.json"))) == 8
        assert len(list(out.glob("synth-*.txt"))) == 8
        manifest = json.loads((out / "synth_manifest.json").read_text())
        assert manifest["seed"] == 3
        assert manifest["count"] == 8
        parse_record((out / "synth-000000.json").read_bytes())  # valid canonical

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["synth", "--count", "5", "--seed", "7", "--out", str(a)], capsys)[0] == 0
        assert run(["synth", "--count", "5", "--seed", "7", "--out", str(b)], capsys)[0] == 0
        for path in sorted(a.iterdir()):
            assert (b / path.name).read_bytes() == path.read_bytes(), path.name

    def test_start_index_offsets_names(self, tmp_path, capsys):
        out = tmp_path / "synth"
        run(["synth", "--count", "2", "--out", str(out), "--start-index", "100"], capsys)
        assert (out / "synth-000100.json").exists()
        assert (out / "synth-000101.json").exists()

    def test_config_file_overrides_flags(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 9}), encoding="utf-8")
        with_config = tmp_path / "with_config"
        direct = tmp_path / "direct"
        run(
            ["synth", "--count", "4", "--seed", "3", "--out", str(with_config),
             "--config", str(config)],
            capsys,
        )
        run(["synth", "--count", "4", "--seed", "9", "--out", str(direct)], capsys)
        for path in sorted(direct.glob("synth-*")):
            assert (with_config / path.name).read_bytes() == path.read_bytes()

    def test_unknown_config_key_is_config_error(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seeed": 9}), encoding="utf-8")
        code, _, err = run(
            ["synth", "--count", "1", "--out", str(tmp_path / "o"), "--config", str(config)],
            capsys,
        )
        assert code == 2
        assert "configuration error" in err
        assert "seeed" in err

    def test_zero_count_is_config_error(self, tmp_path, capsys):
        code, _, err = run(["synth", "--count", "0", "--out", str(tmp_path / "o")], capsys)
        assert code == 2
        assert "configuration error" in err

    def test_held_lock_blocks_and_is_released_normally(self, tmp_path, capsys):
        out = tmp_path / "locked"
        out.mkdir()
        (out / ".resumekit.lock").write_text("99999")
        code, _, err = run(["synth", "--count", "1", "--out", str(out)], capsys)
        assert code == 2
        assert "lock file" in err

        free = tmp_path / "free"
        assert run(["synth", "--count", "1", "--out", str(free)], capsys)[0] == 0
        assert not (free / ".resumekit.lock").exists()

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.strip() == __version__


class TestBuildCommand:
    def test_exports_dataset_artifacts(self, tmp_path, capsys):
        src = tmp_path / "records"
        write_record_pairs(src, 20)
        out = tmp_path / "dataset"
        code, stdout, _ = run(
            ["build", "--real", str(src), "--out", str(out), "--seed", "5"], capsys
        )
        assert code == 0
        assert "bundle of 20 records" in stdout
        assert "train 16, val 2, test 2" in stdout
        for name in ("train.jsonl", "val.jsonl", "test.jsonl", "lora_config.json", "manifest.json"):
            assert (out / name).exists(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 5
        assert manifest["counts"] == {
            "total": 20, "train": 16, "val": 2, "test": 2, "real": 20, "synthetic": 0,
        }

    def test_rebuild_is_byte_identical(self, tmp_path, capsys):
        src = tmp_path / "records"
        write_record_pairs(src, 12)
        a, b = tmp_path / "a", tmp_path / "b"
        run(["build", "--real", str(src), "--out", str(a), "--seed", "2"], capsys)
        run(["build", "--real", str(src), "--out", str(b), "--seed", "2"], capsys)
        for name in ("train.jsonl", "val.jsonl", "test.jsonl", "lora_config.json", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_merges_synth_output(self, tmp_path, capsys):
        synth_dir = tmp_path / "synth"
        run(["synth", "--count", "10", "--seed", "1", "--out", str(synth_dir)], capsys)
        out = tmp_path / "dataset"
        code, stdout, _ = run(
            ["build", "--synthetic", str(synth_dir), "--out", str(out)], capsys
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["counts"]["synthetic"] == manifest["counts"]["total"]
        assert manifest["counts"]["real"] == 0

    def test_normalization_totals_in_manifest(self, tmp_path, capsys):
        src = tmp_path / "records"
        src.mkdir()
        record = make_record(skills=("py", "SQL"))
        data = json.loads(canonical_serialize(record))
        data["experience"][0]["start_date"] = "March 2019"
        (src / "messy.json").write_text(json.dumps(data), encoding="utf-8")
        (src / "messy.txt").write_text("raw resume", encoding="utf-8")
        out = tmp_path / "dataset"
        code, _, _ = run(["build", "--real", str(src), "--out", str(out)], capsys)
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["normalization"]["dates_rewritten"] == 1
        assert manifest["normalization"]["skills_unified"] == 1
        line = (out / "train.jsonl").read_text(encoding="utf-8").splitlines()[0]
        normalized = parse_record(json.loads(line)["output"])
        assert normalized.skills == ("Python", "SQL")
        assert normalized.experience[0].start_date == "2019-03"

    def test_no_inputs_is_data_error(self, tmp_path, capsys):
        code, _, err = run(["build", "--out", str(tmp_path / "o")], capsys)
        assert code == 3
        assert "data error" in err

    def test_missing_directory_is_data_error(self, tmp_path, capsys):
        code, _, err = run(
            ["build", "--real", str(tmp_path / "nope"), "--out", str(tmp_path / "o")],
            capsys,
        )
        assert code == 3
        assert "does not exist" in err

    def test_orphan_json_without_txt_is_data_error(self, tmp_path, capsys):
        src = tmp_path / "records"
        src.mkdir()
        (src / "lonely.json").write_bytes(canonical_serialize(make_record()))
        code, _, err = run(
            ["build", "--real", str(src), "--out", str(tmp_path / "o")], capsys
        )
        assert code == 3
        assert "no matching .txt" in err

    def test_bad_ratios_is_config_error(self, tmp_path, capsys):
        src = tmp_path / "records"
        write_record_pairs(src, 4)
        code, _, err = run(
            ["build", "--real", str(src), "--out", str(tmp_path / "o"),
             "--ratios", "0.9,0.9,0.9"],
            capsys,
        )
        assert code == 2
        assert "configuration error" in err


class TestIngestCommand:
    def write_resumes(self, directory: Path):
        directory.mkdir(parents=True, exist_ok=True)
        self.by_text = {}
        for i, name in enumerate(("Ada", "Ben", "Cleo")):
            text = f"Resume of {name}\nSkills: Python\n"
            (directory / f"{name.lower()}.txt").write_text(text, encoding="utf-8")
            record = make_record(name=name)
            self.by_text[text] = canonical_serialize(record).decode("utf-8")

    def responder(self, counter=None):
        def respond(path, payload, headers):
            if counter is not None:
                counter["n"] = counter.get("n", 0) + 1
            text = payload["messages"][-1]["content"]
            return 200, chat_response(self.by_text[text])

        return respond

    def ingest_args(self, in_dir, out_dir, base_url):
        return [
            "ingest", "--in", str(in_dir), "--out", str(out_dir),
            "--endpoint-url", base_url, "--model", "parser",
        ]

    def test_parses_all_files(self, tmp_path, capsys):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        with serve_chat(self.responder()) as base_url:
            code, stdout, _ = run(self.ingest_args(in_dir, out_dir, base_url), capsys)
        assert code == 0
        assert "parsed 3, skipped 0, failed 0" in stdout
        for stem in ("ada", "ben", "cleo"):
            record = parse_record((out_dir / f"{stem}.json").read_bytes())
            assert record.name.lower() == stem
            assert (out_dir / f"{stem}.txt").read_text() == (in_dir / f"{stem}.txt").read_text()
        assert json.loads((out_dir / "failures.json").read_text()) == []
        manifest = json.loads((out_dir / "ingest_manifest.json").read_text())
        assert all(v["status"] == "ok" for v in manifest["files"].values())

    def test_rerun_skips_unchanged_files(self, tmp_path, capsys):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        counter = {}
        with serve_chat(self.responder(counter)) as base_url:
            argv = self.ingest_args(in_dir, out_dir, base_url)
            run(argv, capsys)
            first_requests = counter["n"]
            code, stdout, _ = run(argv, capsys)
        assert code == 0
        assert "parsed 0, skipped 3, failed 0" in stdout
        assert counter["n"] == first_requests  # no re-requests

    def test_changed_file_is_reparsed(self, tmp_path, capsys):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        with serve_chat(self.responder()) as base_url:
            argv = self.ingest_args(in_dir, out_dir, base_url)
            run(argv, capsys)
            updated = "Resume of Ada\nSkills: Python, SQL\n"
            (in_dir / "ada.txt").write_text(updated, encoding="utf-8")
            self.by_text[updated] = canonical_serialize(
                make_record(name="Ada", skills=("Python", "SQL"))
            ).decode("utf-8")
            code, stdout, _ = run(argv, capsys)
        assert code == 0
        assert "parsed 1, skipped 2, failed 0" in stdout
        assert parse_record((out_dir / "ada.json").read_bytes()).skills == ("Python", "SQL")

    def test_unparseable_reply_is_recorded_not_fatal(self, tmp_path, capsys):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        victim = (in_dir / "ben.txt").read_text()

        def respond(path, payload, headers):
            text = payload["messages"][-1]["content"]
            if text == victim:
                return 200, chat_response("I am sorry, I cannot do that.")
            return 200, chat_response(self.by_text[text])

        with serve_chat(respond) as base_url:
            argv = self.ingest_args(in_dir, out_dir, base_url)
            code, stdout, _ = run(argv, capsys)
            assert code == 0
            assert "parsed 2, skipped 0, failed 1" in stdout
            failures = json.loads((out_dir / "failures.json").read_text())
            assert [f["file"] for f in failures] == ["ben.txt"]
            assert not (out_dir / "ben.json").exists()
            manifest = json.loads((out_dir / "ingest_manifest.json").read_text())
            assert manifest["files"]["ben.txt"]["status"] == "failed"

        # Once the endpoint behaves, the failed file is retried.
        with serve_chat(self.responder()) as base_url:
            code, stdout, _ = run(self.ingest_args(in_dir, out_dir, base_url), capsys)
        assert code == 0
        assert "parsed 1, skipped 2, failed 0" in stdout
        assert (out_dir / "ben.json").exists()

    def test_empty_resume_file_is_recorded_not_fatal(self, tmp_path, capsys):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        (in_dir / "blank.txt").write_text("   \n", encoding="utf-8")
        with serve_chat(self.responder()) as base_url:
            code, stdout, _ = run(self.ingest_args(in_dir, out_dir, base_url), capsys)
        assert code == 0
        assert "parsed 3, skipped 0, failed 1" in stdout
        failures = json.loads((out_dir / "failures.json").read_text())
        assert [f["file"] for f in failures] == ["blank.txt"]
        assert "empty resume text" in failures[0]["error"]

    def test_dead_endpoint_fails_the_run(self, tmp_path, capsys):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        code, _, err = run(
            self.ingest_args(in_dir, out_dir, "http://127.0.0.1:9")
            + ["--max-retries", "0", "--timeout", "0.5"],
            capsys,
        )
        assert code == 4
        assert "endpoint error" in err
        assert "endpoint unusable" in err
        failures = json.loads((out_dir / "failures.json").read_text())
        assert len(failures) == 3

    def test_no_input_files_is_data_error(self, tmp_path, capsys):
        in_dir = tmp_path / "raw"
        in_dir.mkdir()
        code, _, err = run(
            self.ingest_args(in_dir, tmp_path / "out", "http://127.0.0.1:9"), capsys
        )
        assert code == 3
        assert "no .txt files" in err

    def test_api_key_sent_from_named_env_var(self, tmp_path, capsys, monkeypatch):
        in_dir, out_dir = tmp_path / "raw", tmp_path / "parsed"
        self.write_resumes(in_dir)
        monkeypatch.setenv("CUSTOM_KEY_VAR", "sk-custom")
        seen = {}

        def respond(path, payload, headers):
            seen["auth"] = headers.get("Authorization")
            return 200, chat_response(self.by_text[payload["messages"][-1]["content"]])

        with serve_chat(respond) as base_url:
            code, _, _ = run(
                self.ingest_args(in_dir, out_dir, base_url)
                + ["--api-key-env", "CUSTOM_KEY_VAR"],
                capsys,
            )
        assert code == 0
        assert seen["auth"] == "Bearer sk-custom"


class TestEvaluateCommand:
    def evaluate_args(self, dataset, out, base_url, extra=()):
        return [
            "evaluate", "--dataset", str(dataset), "--out", str(out),
            "--endpoint-url", base_url, "--model", "echo-model",
            *extra,
        ]

    def test_echo_endpoint_scores_perfect(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys)
        out = tmp_path / "eval"

        def respond(path, payload, headers):
            return 200, chat_response(payload["messages"][-1]["content"])

        with serve_chat(respond) as base_url:
            code, stdout, _ = run(self.evaluate_args(dataset, out, base_url), capsys)
        assert code == 0
        assert "echo-model" in stdout
        assert "100.00*" in stdout
        for name in ("report.txt", "report.json", "report.csv", "report.png", "run_manifest.json"):
            assert (out / name).exists(), name
        assert (out / "models" / "echo-model.json").exists()
        report = json.loads((out / "report.json").read_text())
        row = report["rows"][0]
        assert all(row["percent"][m] == 100.0 for m in ("em", "f1_sem", "bleu", "rouge", "overall"))

    def test_run_manifest_links_dataset_and_endpoint(self, tmp_path, capsys):
        import hashlib

        dataset = build_dataset(tmp_path, capsys, seed=11)
        out = tmp_path / "eval"

        def respond(path, payload, headers):
            return 200, chat_response(payload["messages"][-1]["content"])

        with serve_chat(respond) as base_url:
            assert run(self.evaluate_args(dataset, out, base_url), capsys)[0] == 0
        manifests = json.loads((out / "run_manifest.json").read_text())
        assert len(manifests) == 1
        entry = manifests[0]
        assert entry["model_label"] == "echo-model"
        assert entry["seed"] == 11
        expected = hashlib.sha256((dataset / "manifest.json").read_bytes()).hexdigest()
        assert entry["dataset_digest"] == expected
        assert entry["metric_suite_version"] == "1"
        assert entry["timestamp"].endswith("+00:00")

    def test_models_file_compares_multiple_endpoints(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys)
        out = tmp_path / "eval"

        def echo(path, payload, headers):
            return 200, chat_response(payload["messages"][-1]["content"])

        def lossy(path, payload, headers):
            data = json.loads(payload["messages"][-1]["content"])
            data["phone"] = ""
            return 200, chat_response(json.dumps(data))

        with serve_chat(echo) as echo_url, serve_chat(lossy) as lossy_url:
            models = tmp_path / "models.json"
            models.write_text(
                json.dumps(
                    [
                        {"label": "echo", "group": "Fine-tuned", "params_label": "8",
                         "base_url": echo_url, "model_id": "echo"},
                        {"label": "lossy", "group": "Base", "params_label": "8",
                         "base_url": lossy_url, "model_id": "lossy"},
                    ]
                ),
                encoding="utf-8",
            )
            code, stdout, _ = run(
                ["evaluate", "--dataset", str(dataset), "--out", str(out),
                 "--models", str(models)],
                capsys,
            )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert [r["label"] for r in report["rows"]] == ["echo", "lossy"]
        assert report["best"]["em"] == ["echo"]
        assert len(json.loads((out / "run_manifest.json").read_text())) == 2
        csv_rows = (out / "report.csv").read_text().splitlines()
        assert len(csv_rows) == 3

    def test_missing_test_split_is_data_error(self, tmp_path, capsys):
        code, _, err = run(
            self.evaluate_args(tmp_path / "nowhere", tmp_path / "o", "http://x"), capsys
        )
        assert code == 3
        assert "missing test split" in err

    def test_empty_test_split_is_data_error(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys, n=5)  # floors give no test lines
        code, _, err = run(
            self.evaluate_args(dataset, tmp_path / "o", "http://x"), capsys
        )
        assert code == 3
        assert "is empty" in err

    def test_no_model_specs_is_config_error(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys)
        code, _, err = run(
            ["evaluate", "--dataset", str(dataset), "--out", str(tmp_path / "o")],
            capsys,
        )
        assert code == 2
        assert "--models" in err
        assert not (tmp_path / "o" / ".resumekit.lock").exists()

    def test_threshold_unmet_is_data_error(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys)
        out = tmp_path / "eval"

        def lossy(path, payload, headers):
            data = json.loads(payload["messages"][-1]["content"])
            data["phone"] = ""
            return 200, chat_response(json.dumps(data))

        with serve_chat(lossy) as base_url:
            code, stdout, err = run(
                self.evaluate_args(dataset, out, base_url, extra=["--min-em", "99.5"]),
                capsys,
            )
        assert code == 3
        assert "threshold unmet" in err
        assert (out / "report.txt").exists()  # reports written before the gate

    def test_threshold_met_passes(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys)
        out = tmp_path / "eval"

        def respond(path, payload, headers):
            return 200, chat_response(payload["messages"][-1]["content"])

        with serve_chat(respond) as base_url:
            code, _, _ = run(
                self.evaluate_args(
                    dataset, out, base_url,
                    extra=["--min-em", "99.5", "--min-overall", "99.5"],
                ),
                capsys,
            )
        assert code == 0

    def test_no_figure_flag(self, tmp_path, capsys):
        dataset = build_dataset(tmp_path, capsys)
        out = tmp_path / "eval"

        def respond(path, payload, headers):
            return 200, chat_response(payload["messages"][-1]["content"])

        with serve_chat(respond) as base_url:
            code, _, _ = run(
                self.evaluate_args(dataset, out, base_url, extra=["--no-figure"]), capsys
            )
        assert code == 0
        assert not (out / "report.png").exists()
