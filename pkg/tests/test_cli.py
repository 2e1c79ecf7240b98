import csv
import subprocess
import sys

import pytest

from udsdm.cli import main

FAST = "lstm.epochs = 3\nlstm.hidden_size = 4\nlstm.max_windows = 64\n"


@pytest.fixture(scope="module")
def fast_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "fast.cfg"
    path.write_text(FAST)
    return path


def common(small_log, out, *extra):
    return ["--dataset", str(small_log), "--nodes", "3", "--out", str(out), *extra]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_ingest(small_log, tmp_path, capsys):
    assert main(["ingest", *common(small_log, tmp_path)]) == 0
    clean = (tmp_path / "clean.csv").read_text().splitlines()
    assert clean[0] == "node_id,seq,temperature,humidity,light,voltage"
    reasons = {r["reason"] for r in rows(tmp_path / "rejects.csv")}
    assert "short line" in reasons
    assert "accepted" in capsys.readouterr().out


def test_ingest_synthesize(tmp_path):
    log = tmp_path / "data" / "lab.txt"
    assert main(["ingest", "--dataset", str(log), "--synthesize", "--synthetic-epochs", "50",
                 "--out", str(tmp_path / "o")]) == 0
    assert log.is_file() and (tmp_path / "o" / "clean.csv").is_file()


def test_train(small_log, tmp_path, fast_cfg):
    assert main(["train", *common(small_log, tmp_path, "--config", str(fast_cfg))]) == 0
    report = rows(tmp_path / "train_report.csv")
    assert [r["node_id"] for r in report] == ["0", "1", "2"]
    assert all(float(r["final_loss"]) >= 0 for r in report)
    assert (tmp_path / "models" / "node_2.lstm").is_file()


def test_run_then_metrics(small_log, tmp_path, fast_cfg, capsys):
    args = common(small_log, tmp_path, "--config", str(fast_cfg), "--epoch", "50", "--name", "demo")
    assert main(["run", *args]) == 0
    run_dir = tmp_path / "runs" / "demo"
    for name in ("config.csv", "nodes.csv", "messages.csv", "synopses.csv", "trace.csv", "metrics.csv"):
        assert (run_dir / name).is_file(), name
    trace = rows(run_dir / "trace.csv")
    assert set(trace[0]) == {"node_id", "step", "e_raw", "e_norm", "dod_p", "dod_f", "G", "decision"}
    assert {r["decision"] for r in trace} <= {"hold", "disseminate", "forced"}
    messages = rows(run_dir / "messages.csv")
    assert len(rows(run_dir / "synopses.csv")) == len(messages)

    capsys.readouterr()
    assert main(["metrics", "--run", str(run_dir), "--out", str(tmp_path / "m.csv")]) == 0
    assert (tmp_path / "m.csv").read_text() == (run_dir / "metrics.csv").read_text()
    assert capsys.readouterr().out.startswith("phi=")


def test_compare(small_log, tmp_path, fast_cfg):
    args = common(small_log, tmp_path, "--config", str(fast_cfg), "--experiments", "1",
                  "--epoch", "50,100", "--theta", "0.6,0.75", "--policy", "bm,udsdm")
    assert main(["compare", *args]) == 0
    table = rows(tmp_path / "compare.csv")
    assert len(table) == 8
    assert [(r["policy"], r["theta"], r["T"]) for r in table[:2]] == [("bm", "0.6", "50"), ("bm", "0.6", "100")]
    for metric in ("phi", "delta", "psi"):
        assert len(rows(tmp_path / f"plot_{metric}.csv")) == 8


def test_missing_dataset_names_flag(tmp_path, capsys):
    assert main(["run", "--dataset", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("udsdm: error: --dataset") and len(err.strip().splitlines()) == 1


def test_bad_config_names_line(small_log, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("lstm.epochs = 3\nmf.medium = 1, 2\n")
    assert main(["train", *common(small_log, tmp_path, "--config", str(cfg))]) == 1
    assert "line 2" in capsys.readouterr().err


def test_missing_config_file(small_log, tmp_path, capsys):
    assert main(["train", *common(small_log, tmp_path, "--config", str(tmp_path / "x.cfg"))]) == 1
    assert "config file not found" in capsys.readouterr().err


def test_unknown_policy(small_log, tmp_path, capsys):
    assert main(["compare", *common(small_log, tmp_path, "--policy", "bm,zz")]) == 1
    assert "--policy" in capsys.readouterr().err


def test_missing_run_dir(tmp_path, capsys):
    assert main(["metrics", "--run", str(tmp_path / "none")]) == 1
    assert "run directory not found" in capsys.readouterr().err


def test_argparse_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--dataset", "x", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--dataset", "x", "--nodes", "0"])
    assert exc.value.code == 2 and "--nodes" in capsys.readouterr().err


def test_train_on_too_short_stream(tmp_path, capsys):
    data = tmp_path / "tiny.csv"
    data.write_text("node_id,a\n" + "".join(f"0,{i}.0\n" for i in range(8)))
    assert main(["train", "--dataset", str(data), "--nodes", "1", "--out", str(tmp_path)]) == 1
    assert "short" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "udsdm", "metrics", "--run", str(tmp_path / "none")],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stderr.startswith("udsdm: error:")
