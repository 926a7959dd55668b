"""End-to-end command-line tests, run in-process through ``main(argv)``.

Exit-code contract: 0 for success (a CLEAN verdict included), 1 for runtime
I/O or validation failures, 2 for usage errors (argparse's convention).
"""

import json
import subprocess
import sys

import pytest

from trimark.cli import main
from trimark.engine import ToyMarkovModel
from trimark.partition import PartitionParams
from trimark.tokens import read_jsonl


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, corpus_path):
    path = tmp_path_factory.mktemp("cli") / "model.json"
    assert main(["train", "--in", str(corpus_path), "--out", str(path)]) == 0
    return path


@pytest.fixture()
def params_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(PartitionParams(delta=10.0, key=7).to_dict()))
    return path


@pytest.fixture()
def prompts_file(tmp_path):
    path = tmp_path / "prompts.jsonl"
    lines = [
        json.dumps(list(range(40, 56))),          # bare id list
        json.dumps({"tokens": list(range(16))}),  # wrapped object
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


def generate_records(tmp_path, model_file, params_file, prompts_file, *extra):
    out = tmp_path / "records.jsonl"
    argv = [
        "generate", "--model", str(model_file), "--in", str(prompts_file),
        "--out", str(out), "--format", "tokens-jsonl", "--n-tokens", "80",
        "--params", str(params_file), *extra,
    ]
    assert main(argv) == 0
    return out


class TestTrain:
    def test_trains_and_reports(self, tmp_path, corpus_path, capsys):
        out = tmp_path / "model.json"
        code = main(["train", "--in", str(corpus_path), "--out", str(out), "--order", "2"])
        assert code == 0
        assert "trained order-2 model" in capsys.readouterr().out
        model = ToyMarkovModel.load(out)
        assert model.order == 2 and model.trained_tokens > 10_000


class TestGenerate:
    def test_text_prompt_single_record(self, tmp_path, model_file, params_file, capsys):
        prompt = tmp_path / "prompt.txt"
        prompt.write_text("the river keeps its own ledger")
        out = tmp_path / "gen.jsonl"
        code = main([
            "generate", "--model", str(model_file), "--in", str(prompt),
            "--out", str(out), "--n-tokens", "60", "--params", str(params_file),
        ])
        assert code == 0
        assert "generated 1 sample(s) x 60 tokens" in capsys.readouterr().out
        (record,) = read_jsonl(out)
        assert len(record["completion_tokens"]) == 60
        assert record["params"]["delta"] == 10.0 and record["params"]["key"] == 7
        assert set(record["step_labels"]) <= {"GREEN", "YELLOW"}

    def test_tokens_jsonl_accepts_both_line_shapes(
        self, tmp_path, model_file, params_file, prompts_file
    ):
        out = generate_records(tmp_path, model_file, params_file, prompts_file)
        records = list(read_jsonl(out))
        assert len(records) == 2
        assert records[0]["prompt_tokens"] == list(range(40, 56))
        assert records[1]["prompt_tokens"] == list(range(16))

    def test_sample_mode_is_seeded(self, tmp_path, model_file, params_file, prompts_file):
        a = generate_records(tmp_path, model_file, params_file, prompts_file,
                             "--mode", "sample", "--sample-seed", "5")
        first = a.read_bytes()
        a.unlink()
        b = generate_records(tmp_path, model_file, params_file, prompts_file,
                             "--mode", "sample", "--sample-seed", "5")
        assert b.read_bytes() == first

    def test_missing_params_file_is_usage_error(self, tmp_path, model_file, prompts_file):
        with pytest.raises(SystemExit) as excinfo:
            main([
                "generate", "--model", str(model_file), "--in", str(prompts_file),
                "--out", str(tmp_path / "x.jsonl"), "--format", "tokens-jsonl",
                "--params", str(tmp_path / "nope.json"),
            ])
        assert excinfo.value.code == 2

    def test_flag_overrides_beat_params_file(
        self, tmp_path, model_file, params_file, prompts_file
    ):
        out = generate_records(tmp_path, model_file, params_file, prompts_file,
                               "--delta", "2.5", "--key", "0x2A")
        record = next(read_jsonl(out))
        assert record["params"]["delta"] == 2.5
        assert record["params"]["key"] == 42
        assert record["params"]["gamma_g"] == 0.25  # untouched fields survive


class TestDetect:
    def test_generated_records_round_trip_flagged(
        self, tmp_path, model_file, params_file, prompts_file, capsys
    ):
        records = generate_records(tmp_path, model_file, params_file, prompts_file)
        out = tmp_path / "reports.jsonl"
        # No --params needed: each record carries the parameters it was made with.
        code = main(["detect", "--in", str(records), "--out", str(out),
                     "--format", "tokens-jsonl"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "sample 0: WATERMARKED" in stdout
        assert "flagged 2/2 samples as WATERMARKED" in stdout
        reports = list(read_jsonl(out))
        assert [r["decision"] for r in reports] == ["WATERMARKED", "WATERMARKED"]
        # Default scope is prompt + completion.
        assert reports[0]["length"] == 16 + 80

    def test_completion_only_scope(
        self, tmp_path, model_file, params_file, prompts_file
    ):
        records = generate_records(tmp_path, model_file, params_file, prompts_file)
        out = tmp_path / "reports.jsonl"
        code = main(["detect", "--in", str(records), "--out", str(out),
                     "--format", "tokens-jsonl", "--completion-only"])
        assert code == 0
        assert all(r["length"] == 80 for r in read_jsonl(out))

    def test_wrong_key_clears_batch(
        self, tmp_path, model_file, params_file, prompts_file, capsys
    ):
        # Sampled generations: greedy completions from the toy model loop,
        # and looping text can spuriously flag under any key.
        records = generate_records(tmp_path, model_file, params_file, prompts_file,
                                   "--mode", "sample", "--sample-seed", "5")
        out = tmp_path / "reports.jsonl"
        code = main(["detect", "--in", str(records), "--out", str(out),
                     "--format", "tokens-jsonl", "--key", "999"])
        assert code == 0
        assert "flagged 0/2" in capsys.readouterr().out

    def test_plain_text_input(self, tmp_path, corpus_path, params_file, capsys):
        out = tmp_path / "report.json"
        code = main(["detect", "--in", str(corpus_path), "--out", str(out),
                     "--params", str(params_file)])
        assert code == 0
        assert "CLEAN" in capsys.readouterr().out
        report = json.loads(out.read_text())
        assert report["decision"] == "CLEAN"
        assert report["length"] == 10_503

    def test_token_list_lines_with_flags_only(self, tmp_path, capsys):
        infile = tmp_path / "streams.jsonl"
        infile.write_text(json.dumps(list(range(30))) + "\n")
        out = tmp_path / "reports.jsonl"
        code = main(["detect", "--in", str(infile), "--out", str(out),
                     "--format", "tokens-jsonl", "--key", "11"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "sample 0:" in stdout
        assert "flagged" not in stdout  # aggregate line only for 2+ samples

    def test_empty_input_fails_with_diagnostic(self, tmp_path, capsys):
        infile = tmp_path / "empty.jsonl"
        infile.write_text("")
        code = main(["detect", "--in", str(infile), "--out", str(tmp_path / "r.jsonl"),
                     "--format", "tokens-jsonl"])
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_out_of_range_token_fails_cleanly(self, tmp_path, capsys):
        infile = tmp_path / "bad.jsonl"
        infile.write_text(json.dumps([1, 2, 999]) + "\n")
        code = main(["detect", "--in", str(infile), "--out", str(tmp_path / "r.jsonl"),
                     "--format", "tokens-jsonl"])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestEvalCommands:
    def write_config(self, tmp_path, **overrides):
        data = dict(
            n_samples=3,
            tokens_per_sample=50,
            params=PartitionParams(delta=10.0, key=3).to_dict(),
            seed=11,
        )
        data.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data))
        return path

    def test_eval_tpr(self, tmp_path, model_file, capsys):
        config = self.write_config(tmp_path)
        out = tmp_path / "tpr.json"
        code = main(["eval-tpr", "--config", str(config), "--model", str(model_file),
                     "--out", str(out)])
        assert code == 0
        assert "TPR 1.0000 (3/3)" in capsys.readouterr().out
        report = json.loads(out.read_text())
        assert report["tpr"] == 1.0 and len(report["per_sample"]) == 3

    def test_eval_fpr(self, tmp_path, capsys):
        config = self.write_config(tmp_path, n_samples=5, tokens_per_sample=100)
        out = tmp_path / "fpr.json"
        code = main(["eval-fpr", "--config", str(config), "--out", str(out)])
        assert code == 0
        assert "FPR 0.0000 (0/5)" in capsys.readouterr().out
        assert json.loads(out.read_text())["fpr"] == 0.0

    def test_missing_config_is_usage_error(self, tmp_path, model_file):
        with pytest.raises(SystemExit) as excinfo:
            main(["eval-tpr", "--config", str(tmp_path / "nope.json"),
                  "--model", str(model_file), "--out", str(tmp_path / "o.json")])
        assert excinfo.value.code == 2

    def test_invalid_config_value_fails_with_field_name(self, tmp_path, model_file, capsys):
        config = self.write_config(tmp_path, tokens_per_sample=10)
        code = main(["eval-tpr", "--config", str(config), "--model", str(model_file),
                     "--out", str(tmp_path / "o.json")])
        assert code == 1
        assert "tokens_per_sample" in capsys.readouterr().err

    def test_sweep_csv_and_summary(self, tmp_path, model_file, capsys):
        config = self.write_config(tmp_path, n_samples=2)
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"gamma_r": [0.0, 0.1]}))
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--config", str(config), "--model", str(model_file),
                     "--grid", str(grid), "--out", str(out)])
        assert code == 0
        assert "swept 2 cell(s) (1 ok, 1 invalid)" in capsys.readouterr().out
        lines = out.read_text().splitlines()
        assert lines[0].startswith("delta,gamma_g,gamma_y,gamma_r")
        assert len(lines) == 3

    def test_sweep_budget_exit_code(self, tmp_path, model_file, capsys):
        config = self.write_config(tmp_path, n_samples=2)
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"delta": [1.0, 2.0], "length": [50, 100]}))
        code = main(["sweep", "--config", str(config), "--model", str(model_file),
                     "--grid", str(grid), "--out", str(tmp_path / "s.csv"),
                     "--max-cells", "3"])
        assert code == 1
        assert "budget" in capsys.readouterr().err


class TestUsage:
    def test_no_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "trimark", "--help"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        for name in ("train", "generate", "detect", "eval-tpr", "eval-fpr", "sweep"):
            assert name in proc.stdout

    def test_module_entry_point_usage_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "trimark", "detect"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 2
        assert "usage" in proc.stderr.lower()
