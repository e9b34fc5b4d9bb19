"""CLI: config binding, artifacts, exit codes, idempotence."""

import pytest

from gwilab.cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, EXIT_TREND, main

GEO_MODEL = """\
[model.offspring]
kind = "geometric"
param = 0.5

[model.immigration]
kind = "geometric"
param = 0.3333333333333333
"""

INCREMENTS = """\
[increments]
kind = "gaussian"
sigma0_sq = 1.0
"""


@pytest.fixture
def geo_config(tmp_path):
    path = tmp_path / "model.toml"
    path.write_text(GEO_MODEL + INCREMENTS)
    return path


class TestLawCommand:
    def test_writes_csv_and_exits_clean(self, geo_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["law", "--config", str(geo_config), "--n", "5",
                     "--K", "64", "--output-dir", str(out)])
        assert code == EXIT_OK
        assert (out / "law_n5.csv").exists()
        assert "survival" in capsys.readouterr().out

    def test_idempotent_overwrite(self, geo_config, tmp_path):
        out = tmp_path / "out"
        args = ["law", "--config", str(geo_config), "--n", "3", "--K", "32",
                "--output-dir", str(out)]
        main(args)
        first = (out / "law_n3.csv").read_bytes()
        main(args)
        assert (out / "law_n3.csv").read_bytes() == first


class TestHarmonicCommand:
    def test_both_routes_agree_in_output(self, geo_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["harmonic", "--config", str(geo_config), "--n-grid", "1,10",
                     "--r", "1.0", "--route", "integral",
                     "--output-dir", str(out)])
        assert code == EXIT_OK
        integral_lines = (out / "harmonic.csv").read_text().splitlines()
        code = main(["harmonic", "--config", str(geo_config), "--n-grid", "1,10",
                     "--r", "1.0", "--route", "sum", "--K", "2048",
                     "--output-dir", str(out)])
        assert code == EXIT_OK
        sum_lines = (out / "harmonic.csv").read_text().splitlines()
        assert integral_lines[0] == sum_lines[0] == "n,r,J"
        for a, b in zip(integral_lines[1:], sum_lines[1:]):
            assert abs(float(a.split(",")[2]) - float(b.split(",")[2])) < 1e-7


class TestConstantsCommand:
    def test_reference_row(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code = main(["constants", "--sigma", "2", "--gamma", "1",
                     "--sigma0sq", "1"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "upsilon = 0.75" in out


class TestClassifyCommand:
    def test_reports_regime(self, capsys):
        code = main(["classify", "--sigma", "2", "--gamma", "1",
                     "--sigma0sq", "1", "--alpha", "2.5", "--tail-a", "1",
                     "--eps-exponent", "0.4"])
        assert code == EXIT_OK
        assert "regime=a_gaussian" in capsys.readouterr().out

    def test_out_of_scope_is_domain_error(self, capsys):
        code = main(["classify", "--sigma", "2", "--gamma", "1",
                     "--sigma0sq", "1", "--alpha", "2.5", "--tail-a", "1",
                     "--eps-exponent", "0.7"])
        assert code == EXIT_DOMAIN
        assert "OutOfScope" in capsys.readouterr().err


class TestExperimentCommand:
    def test_harmonic_study_runs(self, tmp_path, capsys):
        config = tmp_path / "exp.toml"
        config.write_text(GEO_MODEL + """
[experiment]
study = "thm11_harmonic"
n_grid = [100, 200]
r_values = [1.0]
seed = 7
""")
        out = tmp_path / "out"
        code = main(["experiment", "--config", str(config),
                     "--output-dir", str(out)])
        assert code == EXIT_OK
        assert (out / "thm11_harmonic.csv").exists()
        assert (out / "thm11_harmonic.manifest.json").exists()
        assert "trend=ok" in capsys.readouterr().out

    def test_miscalibrated_model_exits_three(self, tmp_path, capsys):
        config = tmp_path / "bad.toml"
        config.write_text("""\
[model.offspring]
kind = "poisson"
param = 1.1

[model.immigration]
kind = "geometric"
param = 0.5

[experiment]
study = "thm11_harmonic"
n_grid = [50, 100]
""")
        code = main(["experiment", "--config", str(config)])
        assert code == EXIT_DOMAIN
        assert "CriticalityViolation" in capsys.readouterr().err

    def test_noisy_trend_exits_four(self, tmp_path):
        """Seed 10 at these path counts leaves a worse error at the larger n."""
        config = tmp_path / "noisy.toml"
        config.write_text(GEO_MODEL + INCREMENTS + """
[experiment]
study = "thm12_ldp"
n_grid = [10, 20]
eps_kind = "power"
eps_exponent = 0.4
paths = 1000
seed = 10
""")
        code = main(["experiment", "--config", str(config),
                     "--output-dir", str(tmp_path / "out")])
        assert code == EXIT_TREND


class TestConfigErrors:
    def test_missing_file(self, capsys):
        assert main(["law", "--config", "nope.toml", "--n", "2"]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_unparseable_toml(self, tmp_path, capsys):
        path = tmp_path / "broken.toml"
        path.write_text("[model.offspring\nkind =")
        assert main(["law", "--config", str(path), "--n", "2"]) == EXIT_CONFIG

    def test_missing_section(self, tmp_path):
        path = tmp_path / "partial.toml"
        path.write_text("[model.offspring]\nkind = \"geometric\"\nparam = 0.5\n")
        assert main(["law", "--config", str(path), "--n", "2"]) == EXIT_CONFIG


class TestOracleCheckCommand:
    def test_passes_on_reference_model(self, geo_config, capsys):
        code = main(["oracle-check", "--config", str(geo_config), "--K", "128"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "law routes" in out and "linear-fractional" in out


class TestSimulateCommand:
    def test_writes_mc_csv(self, geo_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(geo_config), "--n", "10",
                     "--eps", "0.3", "--paths", "2000", "--seed", "3",
                     "--output-dir", str(out)])
        assert code == EXIT_OK
        lines = (out / "mc.csv").read_text().splitlines()
        assert lines[0] == "n,eps,paths,hits,p_hat,std_err,seed"
        assert lines[1].startswith("10,0.3,2000,")
