import csv
import json

import pytest

from glassinterp import cli, harness
from glassinterp.errors import ConfigInvalid
from glassinterp.grem_model import GremSpec
from glassinterp.harness import ExperimentConfig, fekete_trend, fmt, run_config
from glassinterp.sk_model import LOG2


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_valid(self):
        ExperimentConfig().validate()

    @pytest.mark.parametrize("obj, field", [
        ({"beta": 0}, "beta"),
        ({"beta": -1.0}, "beta"),
        ({"model": "rem"}, "model"),
        ({"samples": 1}, "samples"),
        ({"sizes": [4, 2]}, "sizes"),
        ({"splits": [[0, 0]]}, "splits"),
        ({"sizes": [21]}, "sizes"),
        ({"splits": [[9, 8]]}, "splits"),
        ({"model": "grem", "splits": [[8, 8]]}, "splits"),
        ({"model": "grem", "spec": {"gammas": [2.0], "variances": [0.5]}}, "spec"),
        ({"checks": ["asymptotics"]}, "checks"),
        ({"bogus": 1}, "unknown"),
        ({"threads": 0}, "threads"),
    ])
    def test_field_level_errors(self, obj, field):
        with pytest.raises(ConfigInvalid, match=field):
            ExperimentConfig.from_dict(obj)

    def test_load_and_relative_paths(self, tmp_path):
        (tmp_path / "cx.txt").write_text("2\n1 0\n0 1\n")
        (tmp_path / "c.json").write_text(json.dumps(
            {"model": "abstract", "pairs": [{"cx": "cx.txt", "cy": [[2, 0.5], [0.5, 2]]}]}))
        cfg = ExperimentConfig.load(tmp_path / "c.json")
        assert cfg.resolve_matrix(cfg.pairs[0]["cx"], "cx").tolist() == [[1, 0], [0, 1]]

    def test_bad_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{")
        with pytest.raises(ConfigInvalid):
            ExperimentConfig.load(tmp_path / "c.json")

    def test_fmt(self):
        assert fmt(True) == "true" and fmt(3) == "3" and fmt(0.1) == "0.10000000000000001"


class TestTrend:
    def test_sk_trend(self):
        rep = fekete_trend("sk", None, [2, 4, 8], 1.0, 2000, 0)
        assert rep.holds and len(rep.rows) == 3
        infs = [r.running_infimum for r in rep.rows]
        assert infs == [min(r.alpha_over_size for r in rep.rows[: i + 1]) for i in range(3)]
        assert all(a >= b for a, b in zip(infs, infs[1:]))

    def test_grem_trend_floor_and_normalisation(self):
        beta = 1.0
        rep = fekete_trend("grem", GremSpec.geometric(), [4, 8, 16], beta, 1000, 1)
        assert rep.holds
        assert rep.floor == -LOG2 / beta - beta / 2
        for r in rep.rows:
            assert r.alpha_over_size >= rep.floor - 3 * r.stderr
            assert r.size != r.N  # per-site scale is |k(N)|, not N
            assert r.alpha_over_size * r.size == pytest.approx(r.alpha_over_N * r.N)

    @pytest.mark.parametrize("model", ["sk", "grem"])
    def test_high_temperature_rows(self, model):
        beta = 1e-7
        rep = fekete_trend(model, GremSpec.geometric(), [2, 4, 8], beta, 10, 2)
        for r in rep.rows:
            assert beta * r.alpha_over_size == pytest.approx(-LOG2, abs=1e-6)

    def test_rejects_abstract(self):
        with pytest.raises(ConfigInvalid):
            fekete_trend("abstract", None, [2], 1.0, 10, 0)


class TestRun:
    def test_sk_end_to_end(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"model": "sk", "sizes": [2, 4, 8], "beta": 1.0, "samples": 2000})
        res = run_config(cfg, tmp_path)
        assert res.ok
        trend = read_csv(tmp_path / "sk_trend.csv")
        assert [int(r["N"]) for r in trend] == [2, 4, 8]
        sub = read_csv(tmp_path / "sk_subadditivity.csv")
        assert list(sub[0]) == ["N", "N1", "N2", "beta", "M", "seed", "alpha_N", "alpha_N_stderr",
                                "alpha_N1", "alpha_N2", "holds"]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["sizes"] == [2, 4, 8]
        assert manifest["columns"]["sk_trend.csv"][0] == "N"
        assert "version" in manifest

    def test_grem_columns(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"model": "grem", "samples": 100})
        assert run_config(cfg, tmp_path).ok
        sub = read_csv(tmp_path / "grem_subadditivity.csv")
        assert list(sub[0])[:8] == ["N", "N1", "N2", "beta", "M", "seed", "k_total", "lost"]
        asym = read_csv(tmp_path / "grem_asymptotics.csv")
        assert float(asym[-1]["size_ratio"]) == 1 - 2**-3

    def test_abstract_columns(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"model": "abstract", "mc_samples": 20_000})
        assert run_config(cfg, tmp_path).ok
        rows = read_csv(tmp_path / "verify_interp.csv")
        assert list(rows[0]) == ["n", "seed", "m", "F_x", "F_x_stderr", "F_y", "F_y_stderr",
                                 "classic_diag_ok", "classic_offdiag_ok", "metric_ok", "holds"]
        m = read_csv(tmp_path / "metric_check.csv")[0]
        assert m["metric_ok"] == "true" and m["classic_diag_ok"] == "false"

    def test_byte_identical_reruns(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"model": "sk", "sizes": [2, 4], "splits": [[2, 2]],
                                          "samples": 300, "seed": 42})
        run_config(cfg, tmp_path / "a")
        run_config(cfg, tmp_path / "b")
        for f in ("sk_trend.csv", "sk_subadditivity.csv", "sk_superpythagorean.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        base = {"model": "grem", "samples": 200, "seed": 5}
        run_config(ExperimentConfig.from_dict({**base, "threads": 1}), tmp_path / "a")
        run_config(ExperimentConfig.from_dict({**base, "threads": 3}), tmp_path / "b")
        for f in ("grem_trend.csv", "grem_subadditivity.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        base = {"model": "sk", "sizes": [4], "splits": [[2, 2]], "samples": 50}
        run_config(ExperimentConfig.from_dict({**base, "seed": 1}), tmp_path / "a")
        run_config(ExperimentConfig.from_dict({**base, "seed": 2}), tmp_path / "b")
        assert (tmp_path / "a" / "sk_trend.csv").read_bytes() != (tmp_path / "b" / "sk_trend.csv").read_bytes()

    def test_guard_before_computation(self, tmp_path):
        cfg = ExperimentConfig()
        cfg.sizes = [2, 30]
        with pytest.raises(ConfigInvalid):
            run_config(cfg, tmp_path / "x")
        assert not (tmp_path / "x").exists()


class TestCli:
    def test_sk_exit_zero(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"sizes": [2, 4], "splits": [[2, 2]], "samples": 200}))
        assert cli.main(["sk", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 3
        assert "sk_trend: ok" in capsys.readouterr().out

    def test_trend_grem(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"model": "grem", "sizes": [4, 8], "samples": 100}))
        assert cli.main(["trend", "--config", str(cfg), "--out", str(tmp_path), "--threads", "2"]) == 0
        assert sorted(p.name for p in tmp_path.iterdir() if p.suffix == ".csv") == ["grem_trend.csv"]

    def test_trend_rejects_abstract(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"model": "abstract"}))
        assert cli.main(["trend", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_metric_check(self, tmp_path):
        assert cli.main(["metric-check", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "metric_check.csv").exists()

    def test_verify_interp(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"mc_samples": 20000, "pairs": [
            {"cx": [[1, 0.2], [0.2, 1]], "cy": [[1.5, 0], [0, 1.5]], "weights": [1, 2]}]}))
        assert cli.main(["verify-interp", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert len(read_csv(tmp_path / "o" / "interp_identity.csv")) == 1

    def test_align(self, tmp_path):
        (tmp_path / "v.txt").write_text("3 2\n0 0\n1 0\n0 1\n")
        (tmp_path / "w.txt").write_text("3 2\n5 5\n5 6\n4 5\n")
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"points_v": "v.txt", "points_w": "w.txt"}))
        assert cli.main(["align", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        row = read_csv(tmp_path / "o" / "align.csv")[0]
        assert float(row["residual"]) <= 1e-12
        assert (tmp_path / "o" / "align_O.txt").read_text().startswith("2\n")

    def test_align_hypothesis_failure(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"points_v": [[0, 0], [1, 0]], "points_w": [[0, 0], [3, 0]]}))
        assert cli.main(["align", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_invalid_config_exit_two(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"beta": 0}))
        assert cli.main(["sk", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "beta" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert cli.main(["grem", "--config", str(tmp_path / "nope.json")]) == 2

    def test_violation_exit_one(self, tmp_path, monkeypatch):
        real = harness.check_superpythagorean_sk

        def broken(*a, **k):
            r = real(*a, **k)
            return type(r)(False, -1.0, r.worst_pair)

        monkeypatch.setattr(harness, "check_superpythagorean_sk", broken)
        assert cli.main(["sk", "--out", str(tmp_path), "--threads", "1"]) == 1
        rows = read_csv(tmp_path / "sk_superpythagorean.csv")
        assert rows[0]["holds"] == "false"
