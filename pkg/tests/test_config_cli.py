import json

import pytest

from daic.cli import main
from daic.config import build_config, dump_config, known_keys, parse_config
from daic.cycle import CycleRecord, run_experiment
from daic.exceptions import ConfigError
from daic.results import RECORD_FIELDS, emit_results, read_records, summarize, write_records

HEADER = "cycle,repetition,verification_acc,actual_acc,predicted_acc,estimated_acc,triggered,n_labeled,policy_applied"
SYNTH_ARGS = ["--dataset", "synthetic", "--cycles", "2", "--repetitions", "1", "-q"]


def small_toml(tmp_path, **extra):
    lines = [
        "train.epochs = 5",
        "oracle.n_estimators = 10",
        "dataset.synthetic_n = 3500",
        *(f"{k} = {v}" for k, v in extra.items()),
    ]
    path = tmp_path / "small.toml"
    path.write_text("\n".join(lines) + "\n")
    return path


def record(cycle=1, triggered=False, **kw):
    base = dict(
        cycle=cycle,
        repetition=1,
        verification_acc=0.861,
        actual_acc=0.8601234,
        predicted_acc=1 / 3,
        estimated_acc=0.7129999 if triggered else None,
        triggered=triggered,
        n_labeled=500 if triggered else 0,
        policy_applied="none",
    )
    return CycleRecord(**{**base, **kw})


def test_defaults(tmp_path):
    empty = tmp_path / "empty.toml"
    empty.write_text("")
    cfg = parse_config(empty)
    assert (cfg.cycles, cfg.repetitions, cfg.oracle_mode) == (8, 5, "dnn_os")
    assert (cfg.sampling.n, cfg.sampling.random_fraction) == (500, 0.5)
    assert (cfg.trigger.divergence_threshold, cfg.trigger.minimum_accuracy) == (0.05, 0.80)
    assert cfg.shift.swap_pairs == ((2, 7),) and cfg.shift.start_cycle == 4
    assert cfg == parse_config()


def test_flag_overrides_file(tmp_path):
    path = small_toml(tmp_path, oracle_mode='"dnn_os"')
    assert parse_config(path, {"oracle_mode": "baseline"}).oracle_mode == "baseline"
    assert parse_config(path, {"oracle_mode": None}).oracle_mode == "dnn_os"


def test_invalid_threshold_names_field(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("trigger.divergence_threshold = 1.5\n")
    with pytest.raises(ConfigError, match="divergence_threshold"):
        parse_config(path)


def test_unknown_key_is_named(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[trigger]\nslack = 0.1\n")
    with pytest.raises(ConfigError, match="trigger.slack"):
        parse_config(path)


def test_type_mismatch():
    with pytest.raises(ConfigError):
        build_config({"cycles": "eight"})
    with pytest.raises(ConfigError):
        build_config({"repetitions": 0})


def test_echo_round_trip(tmp_path):
    cfg = build_config({"cycles": 3, "oracle_mode": "baseline", "shift.swap_pairs": [[1, 4], [2, 7]]})
    path = tmp_path / "echo.toml"
    path.write_text(dump_config(cfg))
    assert parse_config(path) == cfg
    assert set(known_keys()) >= {"trigger.divergence_threshold", "retrain.mode", "sampling.n"}


def test_csv_header_and_round_trip(tmp_path):
    records = [record(1), record(2, triggered=True, policy_applied="append")]
    path = tmp_path / "records.csv"
    write_records(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == HEADER == ",".join(RECORD_FIELDS)
    assert lines[1] == "1,1,0.861000,0.860123,0.333333,,false,0,none"
    assert read_records(path) == records


def test_one_record_outputs(tmp_path):
    paths = emit_results([record()], tmp_path / "out")
    assert len(paths["records"].read_text().splitlines()) == 2
    assert len(paths["summary"].read_text().splitlines()) == 2
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["n_records"] == 1


def test_summary_statistics():
    rows = summarize([record(4, True, repetition=r, actual_acc=a) for r, a in ((1, 0.7), (2, 0.8))])
    (row,) = rows
    assert row["actual_acc_mean"] == pytest.approx(0.75)
    assert (row["actual_acc_min"], row["actual_acc_max"]) == (0.7, 0.8)
    assert row["triggered"] == 2 and row["n_labeled"] == 1000
    assert summarize([record(1)])[0]["estimated_acc_mean"] is None


def test_same_seed_gives_identical_csv(tmp_path):
    cfg = parse_config(small_toml(tmp_path), {"dataset.kind": "synthetic", "cycles": 2, "repetitions": 2})
    a = emit_results(run_experiment(cfg), tmp_path / "a")["records"].read_bytes()
    b = emit_results(run_experiment(cfg), tmp_path / "b")["records"].read_bytes()
    assert a == b


def test_cli_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", str(small_toml(tmp_path)), "--out", str(out), "--seed", "3", *SYNTH_ARGS])
    assert code == 0
    assert read_records(out / "records.csv")[-1].cycle == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 3
    assert parse_config(out / "config.toml").master_seed == 3


def test_cli_prints_summary(tmp_path, capsys):
    code = main(["run", "--config", str(small_toml(tmp_path)), "--out", str(tmp_path / "o"), *SYNTH_ARGS[:-1]])
    assert code == 0
    text = capsys.readouterr().out
    assert "untriggered" in text and "wrote" in text


@pytest.mark.parametrize(
    "toml, extra, code",
    [
        ("trigger.divergence_threshold = 1.5", [], 3),
        ("", ["--cycles", "9"], 6),
        ("", ["--mnist-images", "/nonexistent/a", "--mnist-labels", "/nonexistent/b", "--dataset", "mnist"], 10),
    ],
)
def test_cli_exit_codes(tmp_path, capsys, toml, extra, code):
    path = tmp_path / "c.toml"
    path.write_text(toml + "\n")
    args = ["run", "--config", str(path), "--out", str(tmp_path / "o"), "--dataset", "synthetic", "-q", *extra]
    assert main(args) == code
    assert "error" in capsys.readouterr().err


def test_cli_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    args = ["run", "--config", str(small_toml(tmp_path)), "--out", str(blocker / "sub"), *SYNTH_ARGS]
    assert main(args) == 10


def test_cli_rejects_unknown_oracle(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--oracle", "oracle9"])
    assert info.value.code == 2
