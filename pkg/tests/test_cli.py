import json

import pytest

from skillsight.cli import main


@pytest.fixture(scope="module")
def cli_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    code = main(
        ["synth", "--task", "distillation", "--n", "6", "--seed", "4",
         "--duration", "12", "--out", str(out)]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    cfg = {
        "teacher": {
            "video": {"layers": 1, "heads": 2, "width": 32, "image_size": 64},
            "image": {"width": 32, "input_px": 8},
            "temporal": {"layers": 1, "heads": 2, "width": 32},
            "gaze": {"layers": 1, "heads": 2, "width": 32},
            "attention": {"grid_p": 8, "patch_len": 8},
            "fusion_hidden": [32, 16],
            "optimizer": {"kind": "sgd", "lr": 0.005, "batch_size": 8, "epochs": 1},
        },
        "student": {
            "layers": 1,
            "heads": 2,
            "width": 32,
            "optimizer": {"kind": "adamw", "lr": 0.001, "batch_size": 16, "epochs": 1},
        },
        "n_clips": 2,
    }
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def teacher_ckpt(cli_dataset, tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("tt")
    code = main(
        ["train-teacher", "--data", str(cli_dataset), "--out", str(out),
         "--config", str(tiny_config), "--seed", "0"]
    )
    assert code == 0
    return out / "teacher.pt"


def test_synth_writes_run_json_and_manifest(cli_dataset):
    run = json.loads((cli_dataset / "run.json").read_text())
    assert run["subcommand"] == "synth"
    assert "versions" in run and "wall_time_s" in run
    manifest = json.loads((cli_dataset / "manifest.json").read_text())
    assert len(manifest["recordings"]) == 12


def test_invalid_config_key_exits_2(cli_dataset, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"teacher": {"vidoe": {}}}))
    code = main(
        ["train-teacher", "--data", str(cli_dataset), "--out", str(tmp_path / "o"),
         "--config", str(bad)]
    )
    assert code == 2


def test_invalid_top_level_key_exits_2(cli_dataset, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"optimizer": {}}))
    code = main(
        ["train-teacher", "--data", str(cli_dataset), "--out", str(tmp_path / "o"),
         "--config", str(bad)]
    )
    assert code == 2
    assert "optimizer" in capsys.readouterr().err


def test_train_teacher_artifacts(teacher_ckpt):
    out = teacher_ckpt.parent
    assert teacher_ckpt.exists()
    assert (out / "metrics.jsonl").exists()
    run = json.loads((out / "run.json").read_text())
    assert run["subcommand"] == "train-teacher"
    assert run["seed"] == 0


def test_eval_emits_accuracy_and_majority(cli_dataset, teacher_ckpt, tmp_path, capsys):
    out = tmp_path / "eval"
    code = main(
        ["eval", "--checkpoint", str(teacher_ckpt), "--data", str(cli_dataset),
         "--split", "test", "--out", str(out), "--n-clips", "2"]
    )
    assert code == 0
    report = json.loads((out / "eval.json").read_text())
    assert "overall_acc" in report and "majority" in report
    assert "per_scenario" in report["majority"]
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert "overall_acc" in printed


def test_train_student_with_flags(cli_dataset, teacher_ckpt, tiny_config, tmp_path):
    out = tmp_path / "student"
    code = main(
        ["train-student", "--data", str(cli_dataset), "--out", str(out),
         "--teacher", str(teacher_ckpt), "--config", str(tiny_config),
         "--cache", str(tmp_path / "cache"), "--seed", "1"]
    )
    assert code == 0
    assert (out / "student.pt").exists()

    # ablation flags disable the corresponding losses
    out2 = tmp_path / "student-gaze-only"
    code = main(
        ["train-student", "--data", str(cli_dataset), "--out", str(out2),
         "--config", str(tiny_config), "--no-distill", "--no-action", "--seed", "1"]
    )
    assert code == 0
    rows = [json.loads(x) for x in (out2 / "metrics.jsonl").read_text().splitlines()]
    assert rows[0]["loss_dis"] == 0.0 and rows[0]["loss_act"] == 0.0


def test_analyze_writes_report_and_plots(cli_dataset, tmp_path):
    roi = tmp_path / "roi.json"
    roi.write_text(json.dumps({"upper": [0, 0, 1, 0.5], "lower": [0, 0.5, 1, 1]}))
    out = tmp_path / "analysis"
    code = main(
        ["analyze", "--data", str(cli_dataset), "--out", str(out),
         "--roi-spec", str(roi), "--group-by", "gt"]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report["groups"]) == {"0", "1"}
    assert (out / "gaze_depth_m_hist.png").exists()
    assert (out / "fixation_duration_s_hist.png").exists()


def test_analyze_group_by_pred_requires_checkpoint(cli_dataset, tmp_path):
    code = main(
        ["analyze", "--data", str(cli_dataset), "--out", str(tmp_path / "x"),
         "--group-by", "pred"]
    )
    assert code == 2


def test_analyze_group_by_pred_with_checkpoint(cli_dataset, teacher_ckpt, tmp_path):
    out = tmp_path / "pred-analysis"
    code = main(
        ["analyze", "--data", str(cli_dataset), "--out", str(out),
         "--group-by", "pred", "--checkpoint", str(teacher_ckpt), "--n-clips", "2"]
    )
    assert code == 0
    assert (out / "report.json").exists()


def test_power_preset_student(tmp_path, capsys):
    out = tmp_path / "power" / "report.json"
    code = main(
        ["power", "--preset", "student-full", "--sensors", "eye",
         "--interval", "8", "--out", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert 8.5 <= report["rows"][0]["power_mw"] <= 10.5
    assert out.with_suffix(".csv").exists()
    assert (out.parent / "run.json").exists()


def test_power_arch_file_with_duty(tmp_path):
    arch = [{"kind": "linear", "d_in": 14, "d_out": 128, "tokens": 16}]
    arch_path = tmp_path / "arch.json"
    arch_path.write_text(json.dumps(arch))
    out = tmp_path / "report.json"
    code = main(
        ["power", "--arch", str(arch_path), "--sensors", "eye=0.5,imu",
         "--interval", "2", "--out", str(out)]
    )
    assert code == 0
    row = json.loads(out.read_text())["rows"][0]
    assert row["sensor_mw"] == pytest.approx(7.8 * 0.5 + 1.2)


def test_power_without_arch_or_preset_exits_2(tmp_path):
    code = main(["power", "--sensors", "eye", "--out", str(tmp_path / "r.json")])
    assert code == 2


def test_unknown_sensor_exits_2(tmp_path):
    code = main(
        ["power", "--preset", "student-full", "--sensors", "sonar",
         "--out", str(tmp_path / "r.json")]
    )
    assert code == 2


def test_missing_data_dir_exits_1(tmp_path):
    code = main(
        ["train-teacher", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]
    )
    assert code == 1
