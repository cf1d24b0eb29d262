import csv
import json

import numpy as np
import pytest

from gwtucker import archive
from gwtucker.cli import main
from gwtucker.runner import (ConfigError, ExperimentConfig, load_channels, resolve_out_dir,
                             run_experiment, run_sweep, save_channels)
from gwtucker.channel_model import generate_channel_set

TABLE_CONFIG = dict(J=21, K=5, M=64, N=512, P=401, L=1, m=60, n=230, p=150)


def quick(**kw):
    base = dict(iters=3, repeats=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_rank_below_streams_rejected(self):
        with pytest.raises(ConfigError, match="m=1 must be at least L=2"):
            ExperimentConfig(m=1, L=2)
        with pytest.raises(ConfigError, match="n=1"):
            ExperimentConfig(n=1, L=2)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="rnaks"):
            ExperimentConfig.from_dict({"rnaks": 3})

    def test_nested_value_rejected(self):
        with pytest.raises(ConfigError, match="flat"):
            ExperimentConfig.from_dict({"model": {"name": "groupwise"}})

    @pytest.mark.parametrize("kw", [dict(model="cp"), dict(scope="all"), dict(m=9),
                                    dict(iters=-1), dict(seed=-1), dict(sweep_axis="m"),
                                    dict(decay=0.0), dict(J=0)])
    def test_field_errors(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_from_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 4, "model": "shared"}))
        cfg = ExperimentConfig.from_file(p)
        assert cfg.seed == 4 and cfg.model == "shared"
        p.write_text("not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(p)

    def test_out_dir_precedence(self, tmp_path, monkeypatch):
        cfg = ExperimentConfig(out_dir=str(tmp_path / "cfg"))
        monkeypatch.delenv("GWTK_OUT", raising=False)
        assert resolve_out_dir(cfg) == tmp_path / "cfg"
        monkeypatch.setenv("GWTK_OUT", str(tmp_path / "env"))
        assert resolve_out_dir(cfg) == tmp_path / "env"
        assert resolve_out_dir(cfg, tmp_path / "flag") == tmp_path / "flag"


def test_channel_persistence(tmp_path):
    cfg = ExperimentConfig()
    cs = generate_channel_set(cfg.topology, cfg.gen_params, 3)
    save_channels(tmp_path / "c.npz", cs)
    back = load_channels(tmp_path / "c.npz")
    assert back.topology == cs.topology
    assert np.array_equal(back.tensors, cs.tensors)


class TestExperiment:
    def test_lossless_run(self, tmp_path):
        rep = run_experiment(quick(m=8, n=16, p=12), tmp_path)
        assert rep["e_c"] <= 1e-8
        for name in ("report.json", "table.txt", "compressed.gwtk"):
            assert (tmp_path / name).exists()
        on_disk = json.loads((tmp_path / "report.json").read_text())
        assert on_disk["e_c"] == rep["e_c"]
        assert len(on_disk["objective_trace"]) >= 1
        lin = np.array(on_disk["sinr_full"])
        np.testing.assert_allclose(on_disk["sinr_full_db"], 10 * np.log10(lin))

    def test_report_fields(self, tmp_path):
        rep = run_experiment(quick(), tmp_path)
        for key in ("R_s", "R_t", "R_t_ledger", "e_c", "objective_trace", "reference_targets"):
            assert key in rep
        assert rep["R_t"] > 0 and rep["R_t_ledger"] > 0

    def test_reproducible_numerics(self, tmp_path):
        a = run_experiment(quick(seed=11), tmp_path / "a")
        b = run_experiment(quick(seed=11), tmp_path / "b")
        assert a["e_c"] == b["e_c"] and a["objective_trace"] == b["objective_trace"]
        assert (tmp_path / "a" / "compressed.gwtk").read_bytes() == \
            (tmp_path / "b" / "compressed.gwtk").read_bytes()

    def test_storage_only_table_dims(self, tmp_path):
        rep = run_experiment(ExperimentConfig(**TABLE_CONFIG), tmp_path, storage_only=True)
        assert round(rep["R_s"], 4) == 6.1648
        assert rep["R_t_ledger"] > 1
        assert "e_c" not in rep

    def test_storage_only_matches_full_run(self, tmp_path):
        cfg = quick()
        assert run_experiment(cfg, tmp_path / "s", storage_only=True)["R_s"] == \
            run_experiment(cfg, tmp_path / "f")["R_s"]

    def test_archive_matches_run(self, tmp_path):
        run_experiment(quick(m=4, n=6, p=5), tmp_path)
        factors, coeffs = archive.load_archive(tmp_path / "compressed.gwtk")
        assert factors.ranks.as_tuple() == (4, 6, 5)
        assert (tmp_path / "compressed.gwtk").stat().st_size == 41 + 16 * (3720 + 216)


class TestSweep:
    def test_n_sweep_ratio_decreasing(self, tmp_path):
        rows = run_sweep(quick(sweep_axis="n", sweep_values=[4, 8, 12, 16]), tmp_path)
        rs = [r[1] for r in rows]
        assert all(a > b for a, b in zip(rs, rs[1:]))
        with open(tmp_path / "sweep.csv") as fh:
            table = list(csv.reader(fh))
        assert table[0] == ["axis", "Rs", "Rt", "ec"]
        assert [int(r[0]) for r in table[1:]] == [4, 8, 12, 16]

    def test_p_sweep_endpoint(self, tmp_path):
        rows = run_sweep(quick(m=8, n=16, sweep_axis="p", sweep_values=[6, 12]), tmp_path)
        assert rows[1][3] <= rows[0][3]

    def test_empty_values(self, tmp_path):
        with pytest.raises(ConfigError):
            run_sweep(quick(sweep_axis="n", sweep_values=[]), tmp_path)

    def test_missing_axis(self, tmp_path):
        with pytest.raises(ConfigError):
            run_sweep(quick(sweep_values=[4]), tmp_path)


class TestCli:
    def write_config(self, path, **kw):
        base = dict(iters=2, repeats=1)
        base.update(kw)
        path.write_text(json.dumps(base))
        return str(path)

    def test_verb_chain(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "c.json")
        out = str(tmp_path / "run")
        assert main(["generate", "--config", cfg, "--out", out]) == 0
        assert main(["compress", "--config", cfg, "--out", out, "--ranks", "4,8,6"]) == 0
        assert main(["evaluate", "--config", cfg, "--out", out, "--ranks", "4,8,6"]) == 0
        text = capsys.readouterr().out
        assert "e_c=" in text
        rep = json.loads((tmp_path / "run" / "report.json").read_text())
        assert rep["config"]["m"] == 4

    def test_evaluate_rejects_mismatched_archive(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "c.json")
        out = str(tmp_path / "run")
        main(["compress", "--config", cfg, "--out", out, "--ranks", "4,8,6"])
        assert main(["evaluate", "--config", cfg, "--out", out, "--ranks", "4,8,4"]) == 2
        assert "archive holds" in capsys.readouterr().err

    def test_report_storage_only(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "t.json", **TABLE_CONFIG)
        assert main(["report", "--config", cfg, "--out", str(tmp_path), "--storage-only"]) == 0
        assert "R_s=6.1648" in capsys.readouterr().out

    def test_sweep_verb(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "s.json", sweep_axis="n", sweep_values=[8, 16])
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "axis,Rs,Rt,ec" and len(lines) == 3

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "bad.json", m=1)
        assert main(["report", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "m=1 must be at least L=2" in capsys.readouterr().err

    def test_unknown_key_exit_code(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "bad.json", ranks="4,8,6")
        assert main(["report", "--config", cfg]) == 2
        assert "unknown config keys" in capsys.readouterr().err

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GWTK_OUT", str(tmp_path / "env"))
        cfg = self.write_config(tmp_path / "c.json")
        assert main(["generate", "--config", cfg, "--seed", "5"]) == 0
        assert (tmp_path / "env" / "channels.npz").exists()

    def test_bad_ranks_flag(self):
        with pytest.raises(SystemExit):
            main(["compress", "--ranks", "4,8"])
