import dataclasses
import json

import numpy as np
import pytest

from trajaudit import harness
from trajaudit.cli import main
from trajaudit.dp import randomized_response
from trajaudit.trajectory import load_trajectories


@pytest.fixture
def tiny_config_file(tmp_path):
    from test_harness import tiny_gan_config

    cfg = tiny_gan_config()
    path = tmp_path / "config.json"
    path.write_text(json.dumps(harness._config_echo(cfg)))
    return path


def mechanism_file(tmp_path, flip=0.25, adjacency=True):
    mech = randomized_response(flip)
    spec = {
        "datasets": list(mech.datasets),
        "outputs": list(mech.outputs),
        "probs": mech.probs.tolist(),
    }
    if adjacency:
        spec["adjacency"] = [["bit0", "bit1"]]
    path = tmp_path / "mech.json"
    path.write_text(json.dumps(spec))
    return path


class TestGenData:
    def test_writes_loadable_csv(self, tmp_path, capsys):
        rc = main(["gen-data", "--out", str(tmp_path), "--n", "12", "--seq-len", "8",
                   "--seed", "4"])
        assert rc == 0
        trajs = load_trajectories(tmp_path / "trajectories.csv", seq_len=8)
        assert len(trajs) == 12


class TestAudit:
    def test_full_pipeline_from_config(self, tmp_path, tiny_config_file, capsys):
        rc = main(["audit", "--config", str(tiny_config_file), "--out", str(tmp_path / "run")])
        assert rc == 0
        out_dir = tmp_path / "run" / "tiny-gan"
        assert (out_dir / "report.json").exists()
        assert (out_dir / "scored_samples.csv").exists()
        assert (out_dir / "roc.csv").exists()

    def test_seed_override(self, tmp_path, tiny_config_file, capsys):
        main(["audit", "--config", str(tiny_config_file), "--out", str(tmp_path / "a")])
        main(["audit", "--config", str(tiny_config_file), "--seed", "5",
              "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "tiny-gan" / "scored_samples.csv").read_bytes()
        b = (tmp_path / "b" / "tiny-gan" / "scored_samples.csv").read_bytes()
        assert a != b

    def test_unknown_preset_is_validation_error(self, tmp_path, capsys):
        rc = main(["audit", "--preset", "nope", "--out", str(tmp_path)])
        assert rc == 2

    def test_missing_source_is_validation_error(self, tmp_path, capsys):
        rc = main(["audit", "--out", str(tmp_path)])
        assert rc == 2


class TestTrainAttackReport:
    def test_staged_pipeline_matches_audit(self, tmp_path, tiny_config_file, capsys):
        ckpt = tmp_path / "ckpt"
        rc = main(["train", "--config", str(tiny_config_file), "--out", str(ckpt)])
        assert rc == 0
        assert (ckpt / "meta.json").exists()

        attack_out = tmp_path / "attack"
        rc = main(["attack", "--config", str(tiny_config_file), "--model", str(ckpt),
                   "--out", str(attack_out)])
        assert rc == 0

        report_out = tmp_path / "report"
        rc = main(["report", "--scores", str(attack_out / "scored_samples.csv"),
                   "--out", str(report_out)])
        assert rc == 0

        audit_out = tmp_path / "audit"
        main(["audit", "--config", str(tiny_config_file), "--out", str(audit_out)])
        staged = json.loads((report_out / "report.json").read_text())
        full = json.loads((audit_out / "tiny-gan" / "report.json").read_text())
        assert staged["auc"] == full["metrics"]["auc"]


class TestVerifyDp:
    def test_holds_at_ln3(self, tmp_path, capsys):
        rc = main(["verify-dp", "--mechanism", str(mechanism_file(tmp_path)),
                   "--epsilon", repr(float(np.log(3.0)))])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["holds"] is True

    def test_violated_below_ln3(self, tmp_path, capsys):
        rc = main(["verify-dp", "--mechanism", str(mechanism_file(tmp_path)),
                   "--epsilon", repr(float(np.log(3.0) - 1e-3))])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["holds"] is False
        assert out["witness"]

    def test_adjacent_flag_overrides(self, tmp_path, capsys):
        path = mechanism_file(tmp_path, adjacency=False)
        rc = main(["verify-dp", "--mechanism", str(path), "--epsilon", "2.0",
                   "--adjacent", "bit0,bit1"])
        assert rc == 0

    def test_no_adjacency_is_validation_error(self, tmp_path, capsys):
        path = mechanism_file(tmp_path, adjacency=False)
        rc = main(["verify-dp", "--mechanism", str(path), "--epsilon", "2.0"])
        assert rc == 2


class TestCompare:
    def test_compare_reports(self, tmp_path, tiny_config_file, capsys):
        main(["audit", "--config", str(tiny_config_file), "--out", str(tmp_path / "a")])
        main(["audit", "--config", str(tiny_config_file), "--seed", "5",
              "--out", str(tmp_path / "b")])
        capsys.readouterr()  # drop the audit progress lines
        rc = main(["compare",
                   str(tmp_path / "a" / "tiny-gan" / "report.json"),
                   str(tmp_path / "b" / "tiny-gan" / "report.json")])
        assert rc == 0
        diff = json.loads(capsys.readouterr().out)
        assert "auc_delta" in diff


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["audit"])  # missing required --out
        assert exc.value.code == 1

    def test_unknown_command_is_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_missing_file_is_2(self, tmp_path, capsys):
        rc = main(["report", "--scores", str(tmp_path / "missing.csv"),
                   "--out", str(tmp_path)])
        assert rc == 2
