"""End-to-end runs of the command-line front end."""

import csv

import numpy as np
import pytest

from bhme.cli import main


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "bhme.env"
    path.write_text("MAX_ITERATIONS=30\nMIN_ITERATIONS=5\nANNEALING_MODE=none\n")
    return str(path)


@pytest.fixture
def toy_files(tmp_path):
    train_path, test_path = tmp_path / "train.csv", tmp_path / "test.csv"
    for path, n, seed in ((train_path, "40", "1"), (test_path, "15", "2")):
        args = ["generate", "toy", "--n", n, "--seed", seed, "--out", str(path)]
        assert main(args) == 0
    return str(train_path), str(test_path)


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def test_generate_writes_header_and_rows(toy_files):
    train_path, _ = toy_files
    with open(train_path) as handle:
        lines = handle.read().splitlines()
    assert lines[0] == "x,t"
    assert len(lines) == 41


def test_generate_arm(tmp_path):
    path = tmp_path / "arm.csv"
    assert main(["generate", "arm", "--n", "12", "--out", str(path)]) == 0
    rows = read_csv(path)
    assert len(rows) == 12
    assert list(rows[0]) == ["x1", "x2", "theta1", "theta2"]


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2
    assert "error kind=usage" in capsys.readouterr().err


def test_missing_data_file(tmp_path, capsys):
    code = main(
        [
            "train",
            str(tmp_path / "absent.csv"),
            "--topology",
            "(E,E)",
            "--out",
            str(tmp_path / "model.json"),
        ]
    )
    assert code == 3
    assert capsys.readouterr().err.startswith("error kind=data message=")


def test_missing_config_file(tmp_path, toy_files):
    train_path, _ = toy_files
    code = main(
        [
            "--config",
            str(tmp_path / "absent.env"),
            "train",
            train_path,
            "--topology",
            "E",
            "--out",
            str(tmp_path / "model.json"),
        ]
    )
    assert code == 3


def test_malformed_topology(tmp_path, toy_files, capsys):
    train_path, _ = toy_files
    code = main(
        ["train", train_path, "--topology", "(E,", "--out", str(tmp_path / "m.json")]
    )
    assert code == 3
    assert "kind=structural" in capsys.readouterr().err


def test_train_predict_evaluate(tmp_path, toy_files, config_file, capsys):
    train_path, test_path = toy_files
    model = tmp_path / "model.json"
    code = main(
        [
            "--config",
            config_file,
            "train",
            train_path,
            "--topology",
            "(E,(E,E))",
            "--seed",
            "3",
            "--out",
            str(model),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("topology=(E,(E,E)) bound=")
    iterations = int(out.split("iterations=")[1])
    trace = read_csv(tmp_path / "model.trace.csv")
    assert len(trace) == iterations
    assert all(row["inverse_temperature"] == "1" for row in trace)

    predictions = tmp_path / "predictions.csv"
    assert main(["predict", str(model), test_path, "--out", str(predictions)]) == 0
    rows = read_csv(predictions)
    assert len(rows) == 15
    assert list(rows[0]) == ["x", "t", "expert", "mixing_0", "mixing_1", "mixing_2"]
    for row in rows:
        mixing = [float(row[f"mixing_{j}"]) for j in range(3)]
        assert sum(mixing) == pytest.approx(1.0)
        assert int(row["expert"]) == max(range(3), key=lambda j: (mixing[j], -j))

    capsys.readouterr()
    assert main(["evaluate", str(model), test_path, "--mode", "mixture-mean"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("metric=smse value=")
    assert float(line.split("value=")[1]) >= 0.0


def test_training_is_byte_deterministic(tmp_path, toy_files, config_file):
    train_path, _ = toy_files
    outputs = []
    for name in ("first.json", "second.json"):
        path = tmp_path / name
        args = ["--config", config_file, "train", train_path, "--num-experts", "2"]
        assert main(args + ["--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_topology_index_out_of_range(tmp_path, toy_files, config_file):
    train_path, _ = toy_files
    args = ["--config", config_file, "train", train_path, "--num-experts", "4"]
    code = main(args + ["--topology-index", "2", "--out", str(tmp_path / "m.json")])
    assert code == 3


def test_arm_end_effector_evaluation(tmp_path, config_file, capsys):
    train_path, test_path = tmp_path / "arm.csv", tmp_path / "arm_test.csv"
    assert main(["generate", "arm", "--n", "80", "--out", str(train_path)]) == 0
    args = ["generate", "arm", "--n", "25", "--seed", "1"]
    assert main(args + ["--out", str(test_path)]) == 0
    model = tmp_path / "arm.json"
    args = ["--config", config_file, "train", str(train_path), "--num-experts", "2"]
    assert main(args + ["--standardize", "--out", str(model)]) == 0

    capsys.readouterr()
    errors = tmp_path / "errors.csv"
    code = main(
        [
            "--config",
            config_file,
            "evaluate",
            str(model),
            str(test_path),
            "--metric",
            "end-effector",
            "--out",
            str(errors),
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.startswith("metric=end-effector all=")
    rows = read_csv(errors)
    assert len(rows) == 25
    assert list(rows[0]) == ["x1", "x2", "theta1", "theta2", "error", "region"]
    assert {row["region"] for row in rows} <= {"A", "B", "C"}
    assert all(float(row["error"]) >= 0.0 for row in rows)


def test_select_writes_reports(tmp_path, toy_files, config_file, capsys):
    train_path, _ = toy_files
    prefix = tmp_path / "sweep"
    model = tmp_path / "best.json"
    code = main(
        [
            "--config",
            config_file,
            "select",
            train_path,
            "--max-experts",
            "3",
            "--restarts",
            "2",
            "--out",
            str(prefix),
            "--model-out",
            str(model),
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.startswith("best=")
    assert len(read_csv(f"{prefix}.runs.csv")) == 6
    curve = [row["num_experts"] for row in read_csv(f"{prefix}.ockham.csv")]
    assert curve
    assert set(curve) <= {"1", "2", "3"}
    assert (tmp_path / "sweep.summary.json").is_file()
    assert model.is_file()


def test_baseline_command(tmp_path, toy_files):
    train_path, test_path = toy_files
    predictions = tmp_path / "baseline.csv"
    code = main(
        [
            "baseline",
            train_path,
            test_path,
            "--features",
            "polynomial",
            "--degree",
            "3",
            "--out",
            str(predictions),
            "--model-out",
            str(tmp_path / "baseline.json"),
        ]
    )
    assert code == 0
    rows = read_csv(predictions)
    assert len(rows) == 15
    assert list(rows[0]) == ["x", "t"]

    assert main(["evaluate", str(tmp_path / "baseline.json"), test_path]) == 0


def test_invalid_config_value(tmp_path, capsys):
    path = tmp_path / "bad.env"
    path.write_text("MAX_ITERATIONS=abc\n")
    out = tmp_path / "toy.csv"
    code = main(["--config", str(path), "generate", "toy", "--out", str(out)])
    assert code == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith("error kind=invalid-argument message=")
    assert "MAX_ITERATIONS" in err[0]
    assert not out.exists()


def test_headerless_kin8nm_files(tmp_path, config_file, capsys):
    rng = np.random.default_rng(0)
    inputs = rng.uniform(-1, 1, size=(50, 8))
    targets = inputs @ rng.normal(size=8) + 0.01 * rng.normal(size=50)
    table = np.column_stack([inputs, targets])
    train_path, test_path = tmp_path / "train.csv", tmp_path / "test.csv"
    inputs_path = tmp_path / "inputs.csv"
    np.savetxt(train_path, table[:40], delimiter=",")
    np.savetxt(test_path, table[40:], delimiter=",")
    np.savetxt(inputs_path, inputs[40:], delimiter=",")

    model = tmp_path / "model.json"
    args = ["--config", config_file, "train", str(train_path), "--schema", "kin8nm"]
    assert main(args + ["--num-experts", "2", "--out", str(model)]) == 0

    capsys.readouterr()
    assert main(["evaluate", str(model), str(test_path)]) == 0
    assert capsys.readouterr().out.startswith("metric=smse value=")

    predictions = tmp_path / "predictions.csv"
    code = main(["predict", str(model), str(inputs_path), "--out", str(predictions)])
    assert code == 0
    rows = read_csv(predictions)
    assert len(rows) == 10
    assert list(rows[0])[:9] == [f"theta{k}" for k in range(1, 9)] + ["y"]
