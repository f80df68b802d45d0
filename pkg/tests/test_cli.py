import json

import pytest

from hrscluster import cli, data, mlp


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One tiny gen + train run shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {
        "name": "clitiny",
        "users": 4,
        "antennas": 8,
        "samples": 20,
        "seed": 31,
    }
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    dataset_path = root / "data.hrsdat"
    model_path = root / "model.hrsmlp"
    assert cli.run(["gen-dataset", "--config", str(cfg_path), "--out", str(dataset_path)]) == 0
    assert (
        cli.run(
            [
                "train",
                "--data",
                str(dataset_path),
                "--out",
                str(model_path),
                "--epochs",
                "4",
                "--report",
                str(root / "train.json"),
            ]
        )
        == 0
    )
    return root


def test_gen_dataset_writes_loadable_file(workdir):
    ds = data.load(workdir / "data.hrsdat")
    assert ds.config.name == "clitiny"
    assert len(ds.all_samples()) > 0


def test_train_writes_model_and_report(workdir):
    model = mlp.load_model(workdir / "model.hrsmlp")
    assert model.layer_dims[0] == 2 * 4 * 8
    report = json.loads((workdir / "train.json").read_text())
    assert len(report["train_loss"]) == 4


def test_eval_and_compare_produce_reports(workdir, capsys):
    out = workdir / "report"
    rc = cli.run(
        [
            "eval",
            "--data",
            str(workdir / "data.hrsdat"),
            "--model",
            str(workdir / "model.hrsmlp"),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert (out / "clitiny_summary.csv").exists()
    rc = cli.run(
        [
            "compare",
            "--data",
            str(workdir / "data.hrsdat"),
            "--model",
            str(workdir / "model.hrsmlp"),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert (out / "clitiny_boxplot.svg").exists()
    printed = capsys.readouterr().out
    for method in ("HC", "NN", "UNI", "SING"):
        assert method in printed


def test_csv_export_flag(workdir, tmp_path):
    rc = cli.run(
        [
            "gen-dataset",
            "--config",
            str(workdir / "cfg.json"),
            "--out",
            str(tmp_path / "d.hrsdat"),
            "--csv",
            str(tmp_path / "labels.csv"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "labels.csv").read_text().startswith("label,rate,scenario,split")


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"users": 4, "antennas": 8, "tau_sq": 7.0}))
    rc = cli.run(["gen-dataset", "--config", str(bad), "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    rc = cli.run(["gen-dataset", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")])
    assert rc == 2


def test_corrupt_dataset_exits_3(workdir, tmp_path):
    corrupted = tmp_path / "corrupt.hrsdat"
    raw = bytearray((workdir / "data.hrsdat").read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    corrupted.write_bytes(bytes(raw))
    rc = cli.run(["train", "--data", str(corrupted), "--out", str(tmp_path / "m")])
    assert rc == 3


def test_scenario_model_mismatch_exits_2(workdir, tmp_path):
    other_cfg = tmp_path / "other.json"
    other_cfg.write_text(json.dumps({"users": 3, "antennas": 6, "samples": 12, "seed": 5}))
    other_data = tmp_path / "other.hrsdat"
    assert cli.run(["gen-dataset", "--config", str(other_cfg), "--out", str(other_data)]) == 0
    rc = cli.run(
        [
            "eval",
            "--data",
            str(other_data),
            "--model",
            str(workdir / "model.hrsmlp"),
            "--out",
            str(tmp_path / "r"),
        ]
    )
    assert rc == 2


def test_seed_override_changes_dataset(workdir, tmp_path):
    out1 = tmp_path / "a.hrsdat"
    out2 = tmp_path / "b.hrsdat"
    base = ["gen-dataset", "--config", str(workdir / "cfg.json")]
    assert cli.run(["--seed", "99", *base, "--out", str(out1)]) == 0
    assert cli.run(["--seed", "100", *base, "--out", str(out2)]) == 0
    assert out1.read_bytes() != out2.read_bytes()
    assert data.load(out1).config.seed == 99


def test_sweep_runs_all_configs(tmp_path):
    cfg_dir = tmp_path / "configs"
    cfg_dir.mkdir()
    for name, seed in (("s1", 1), ("s2", 2)):
        (cfg_dir / f"{name}.json").write_text(
            json.dumps({"name": name, "users": 3, "antennas": 6, "samples": 12, "seed": seed})
        )
    out = tmp_path / "out"
    rc = cli.run(["sweep", "--configs", str(cfg_dir), "--out", str(out)])
    assert rc == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("scenario,")
    assert len(summary) == 3
    for name in ("s1", "s2"):
        assert (out / name / "dataset.hrsdat").exists()
        assert (out / name / "model.hrsmlp").exists()
        assert (out / name / f"{name}_boxplot.svg").exists()


def test_threads_flag_preserves_determinism(workdir, tmp_path):
    serial = tmp_path / "serial.hrsdat"
    parallel = tmp_path / "parallel.hrsdat"
    base = ["gen-dataset", "--config", str(workdir / "cfg.json")]
    assert cli.run([*base, "--out", str(serial)]) == 0
    assert cli.run(["--threads", "2", *base, "--out", str(parallel)]) == 0
    assert serial.read_bytes() == parallel.read_bytes()
