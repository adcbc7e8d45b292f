import json
import os

import numpy as np
import pytest

from hyperloops import FittedModel, load_model, write_hyperlink_file
from hyperloops.cli import main
from hyperloops.synthetic import planted_hypergraph


TRIANGLE = "a b\nb c\na c\n"


@pytest.fixture()
def triangle_file(write_file):
    return write_file("triangle.txt", TRIANGLE)


@pytest.fixture()
def planted_file(tmp_path):
    path = tmp_path / "planted.txt"
    with open(path, "w", encoding="utf-8") as f:
        write_hyperlink_file(f, planted_hypergraph(groups=4, seed=3))
    return str(path)


@pytest.fixture()
def zero_model_file(tmp_path):
    path = str(tmp_path / "zero.model")
    FittedModel(
        tau_max=3,
        gamma=0.0,
        intercept=0.0,
        alpha=np.zeros(2),
        beta=np.zeros(2),
        mean=np.zeros(4),
        scale=np.ones(4),
        ridge_lambda=1e-6,
    ).save(path)
    return path


def score_rows(text: str) -> list[list[str]]:
    return [line.split("\t") for line in text.splitlines() if not line.startswith("#")]


class TestFit:
    def test_triangle_with_one_candidate(self, tmp_path, triangle_file, write_file):
        candidates = write_file("candidates.txt", "a b c\n")
        model_path = str(tmp_path / "triangle.model")
        code = main(
            ["fit", "--graph", triangle_file, "--candidates", candidates, "--model", model_path]
        )
        assert code == 0
        with open(model_path, encoding="utf-8") as f:
            text = f.read()
        assert "# config: " in text
        assert "version = " in text
        assert load_model(model_path).tau_max == 8

    def test_malformed_line(self, tmp_path, write_file, capsys):
        graph = write_file("bad.txt", "a b\nb c\nc c d\n")
        code = main(["fit", "--graph", graph, "--model", str(tmp_path / "m")])
        assert code == 1
        assert "line 3" in capsys.readouterr().err

    def test_singleton_gamma_grid(self, tmp_path, triangle_file, write_file):
        candidates = write_file("candidates.txt", "a b c\n")
        model_path = str(tmp_path / "triangle.model")
        code = main(
            [
                "fit",
                "--graph",
                triangle_file,
                "--candidates",
                candidates,
                "--model",
                model_path,
                "--gamma",
                "0.5:0.1:0.5",
                "--tau-max",
                "4",
            ]
        )
        assert code == 0
        model = load_model(model_path)
        assert model.gamma == 0.5
        assert model.tau_max == 4

    def test_invalid_grid_is_a_config_error(self, tmp_path, triangle_file, capsys):
        code = main(
            ["fit", "--graph", triangle_file, "--model", str(tmp_path / "m"), "--gamma", "2:0.1"]
        )
        assert code == 3
        assert "Invalid grid" in capsys.readouterr().err


class TestScore:
    def test_zero_model_ranks_alphabetically(
        self, triangle_file, zero_model_file, write_file, capsys
    ):
        candidates = write_file("candidates.txt", "c b\na c\nb a\n")
        code = main(
            [
                "score",
                "--graph",
                triangle_file,
                "--model",
                zero_model_file,
                "--candidates",
                candidates,
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("# hyperloops ")
        assert score_rows(out) == [
            ["a+b", "0.5", "1"],
            ["a+c", "0.5", "2"],
            ["b+c", "0.5", "3"],
        ]

    def test_duplicate_candidates(self, triangle_file, zero_model_file, write_file, capsys):
        candidates = write_file("candidates.txt", "a b c\nc b a\n")
        code = main(
            [
                "score",
                "--graph",
                triangle_file,
                "--model",
                zero_model_file,
                "--candidates",
                candidates,
            ]
        )
        assert code == 1
        assert "Duplicate" in capsys.readouterr().err

    def test_dimension_mismatch(self, triangle_file, zero_model_file, write_file):
        candidates = write_file("candidates.txt", "a b c\n")
        code = main(
            [
                "score",
                "--graph",
                triangle_file,
                "--model",
                zero_model_file,
                "--candidates",
                candidates,
                "--tau-max",
                "5",
            ]
        )
        assert code == 2

    def test_ranking_does_not_depend_on_jobs(self, tmp_path, planted_file, write_file):
        model_path = str(tmp_path / "planted.model")
        assert (
            main(
                [
                    "fit",
                    "--graph",
                    planted_file,
                    "--model",
                    model_path,
                    "--negatives",
                    "30",
                    "--tau-max",
                    "4",
                    "--gamma",
                    "0:0.5:1",
                ]
            )
            == 0
        )
        candidates = write_file("candidates.txt", "n00 n07\nn01 n02 n03\nn12 n20\nn05 n11\n")
        outputs = []
        for jobs in ("1", "3"):
            output = str(tmp_path / f"scores-{jobs}.tsv")
            code = main(
                [
                    "score",
                    "--graph",
                    planted_file,
                    "--model",
                    model_path,
                    "--candidates",
                    candidates,
                    "--jobs",
                    jobs,
                    "--output",
                    output,
                ]
            )
            assert code == 0
            with open(output, "rb") as f:
                outputs.append(f.read())
        assert outputs[0] == outputs[1]
        assert len(score_rows(outputs[0].decode())) == 4


class TestExperiment:
    ARGS = [
        "--repetitions",
        "1",
        "--seed",
        "7",
        "--test-count",
        "8",
        "--negatives",
        "24",
        "--tau-max",
        "4",
        "--gamma",
        "0:0.5:2",
    ]

    def run(self, planted_file, output, *extra):
        return main(["experiment", "--graph", planted_file, "--output", output, *self.ARGS, *extra])

    def test_identical_bytes(self, tmp_path, planted_file):
        first, second = str(tmp_path / "first.json"), str(tmp_path / "second.json")
        assert self.run(planted_file, first) == 0
        assert self.run(planted_file, second, "--jobs", "2") == 0
        with open(first, "rb") as f1, open(second, "rb") as f2:
            assert f1.read() == f2.read()
        assert os.path.exists(first + ".split7")

    def test_run_config_is_echoed(self, tmp_path, planted_file):
        output = str(tmp_path / "report.json")
        assert self.run(planted_file, output, "--drop-duplicates") == 0
        with open(output, encoding="utf-8") as f:
            run = json.load(f)["config"]["run"]
        assert run["options"]["drop_duplicates"] is True
        assert run["options"]["drop_singletons"] is False
        assert run["candidates"] is None
        assert run["graph"] == planted_file
        assert "jobs" not in run
        assert "output" not in run

        with open(output + ".split7", encoding="utf-8") as f:
            manifest = f.read()
        config_line = next(
            line for line in manifest.splitlines() if line.startswith("# config: ")
        )
        assert json.loads(config_line[len("# config: ") :]) == run

    def test_ablation_is_reported(self, tmp_path, planted_file):
        output = str(tmp_path / "report.json")
        assert self.run(planted_file, output, "--ablation", "node-only") == 0
        with open(output, encoding="utf-8") as f:
            report = json.load(f)
        assert report["mode"] == "node-only"
        assert report["dataset"] == "planted.txt"
        assert "runtime" not in report["runs"][0]

    def test_baseline(self, tmp_path, planted_file):
        output = str(tmp_path / "report.json")
        assert self.run(planted_file, output, "--baseline", "cn") == 0
        with open(output, encoding="utf-8") as f:
            assert json.load(f)["method"] == "cn"

    def test_timings_and_database(self, tmp_path, planted_file):
        from hyperloops.store import ReportStore

        output = str(tmp_path / "report.json")
        database = f"sqlite:///{tmp_path / 'results.db'}"
        assert self.run(planted_file, output, "--timings", "--database", database) == 0
        with open(output, encoding="utf-8") as f:
            assert "runtime" in json.load(f)["runs"][0]
        rows = ReportStore(database).summaries()
        assert [row[:2] for row in rows] == [("loops", "planted.txt")]

    def test_test_count_too_large(self, triangle_file, capsys):
        assert main(["experiment", "--graph", triangle_file]) == 3
        assert "must be smaller than m=3" in capsys.readouterr().err


class TestOracle:
    def test_triangle(self, triangle_file, capsys):
        code = main(["oracle", "--graph", triangle_file, "--tau", "3", "--kind", "node"])
        assert code == 0
        assert capsys.readouterr().out == "bruteforce: 6\ntrace: 6\n"

    def test_single_hyperlink(self, write_file, capsys):
        graph = write_file("single.txt", "a b c\n")
        code = main(["oracle", "--graph", graph, "--tau", "2", "--kind", "hyperlink"])
        assert code == 0
        assert capsys.readouterr().out == "bruteforce: 0\ntrace: 0\n"

    def test_large_graph(self, write_file):
        labels = [f"v{i:02d}" for i in range(20)]
        graph = write_file("path.txt", "".join(f"{a} {b}\n" for a, b in zip(labels, labels[1:])))
        assert main(["oracle", "--graph", graph, "--tau", "3"]) == 3


def test_evaluate(write_file, capsys):
    scores = write_file("scores.tsv", "a+b\t0.9\nb+c\t0.2\na+c\t0.4\nc+d\t0.1\n")
    truth = write_file("truth.txt", "b a\nc b\n")
    code = main(["evaluate", "--external-scores", scores, "--candidates", truth])
    assert code == 0
    result = json.loads(capsys.readouterr().out)
    assert result["auc"] == 0.75
    assert result["precision"] == 0.5
    assert result["positives"] == 2


def test_stats(triangle_file, capsys):
    assert main(["stats", "--graph", triangle_file]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 3
    assert summary["m"] == 3
    assert summary["cardinality_histogram"] == {"2": 3}


def test_missing_subcommand():
    assert main([]) == 3


def test_version(capsys):
    from hyperloops import __version__

    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == __version__
