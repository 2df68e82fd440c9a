import csv
import io
import math

import pytest

from hypocoercive.harness.cli import main
from hypocoercive.harness.config import ConfigError, DecaySettings, SimulateSettings, ScenarioConfig, load_scenario, shipped_scenarios
from hypocoercive.harness.runners import run_certify, run_decay, run_identities, run_simulate
from hypocoercive.reports import ROW_HEADER, ReportRow, rows_to_csv

SHIPPED = ["general-epsilon", "kfp-2d", "kfp-quadratic", "kfp-stiff", "kfp-tampered-z"]


def variant(name, **changes):
    data = load_scenario(name).to_dict()
    for key, val in changes.items():
        if "." in key:
            outer, inner = key.split(".")
            data[outer][inner] = val
        else:
            data[key] = val
    return ScenarioConfig.from_dict(data)


def fast(name="kfp-quadratic", **changes):
    """Scenario with the expensive entropy and pointwise parts switched off."""
    base = {"decay.entropy": False, "decay.pointwise_random": 2, "decay.times": [0.0, 1.0, 2.0]}
    base.update(changes)
    return variant(name, **base)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestConfig:
    def test_shipped(self):
        assert shipped_scenarios() == SHIPPED

    @pytest.mark.parametrize("name", SHIPPED)
    def test_roundtrip(self, name):
        cfg = load_scenario(name)
        again = ScenarioConfig.from_toml(cfg.to_toml())
        assert again == cfg
        assert ScenarioConfig.from_toml(again.to_toml()).to_toml() == again.to_toml()

    def test_defaults_region(self):
        cfg = ScenarioConfig(name="t", mode="kinetic", n=2, V="1/2*x1^2 + 1/2*x2^2")
        assert cfg.region_lo == [-2.0] * 4 and cfg.dim == 4

    @pytest.mark.parametrize("bad", [
        dict(mode="other"),
        dict(V=""),
        dict(V="x1 +"),
        dict(Z=["d/dq"]),
        dict(eta="best"),
        dict(kappa="magic"),
        dict(region_lo=[0.0], region_hi=[1.0]),
        dict(region_lo=[1.0, 1.0], region_hi=[0.0, 0.0]),
        dict(unknown_key=1),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            variant("kfp-quadratic", **bad)

    def test_bad_test_function(self):
        with pytest.raises(ConfigError):
            variant("kfp-quadratic", **{"decay.test_functions": ["x9"]})

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_scenario("no-such-scenario")
        with pytest.raises(ConfigError):
            load_scenario(str(tmp_path / "missing.toml"))
        broken = tmp_path / "broken.toml"
        broken.write_text("name = \n")
        with pytest.raises(ConfigError):
            load_scenario(str(broken))

    def test_load_by_path(self, tmp_path):
        path = tmp_path / "mine.toml"
        path.write_text(load_scenario("kfp-stiff").to_toml())
        assert load_scenario(str(path)) == load_scenario("kfp-stiff")


class TestRows:
    def test_inequality_literal(self):
        assert ReportRow.inequality("c", 1.0, 1.0).passed
        assert ReportRow.inequality("c", 1.0 + 1e-9, 1.0, rtol=1e-8).passed
        assert not ReportRow.inequality("c", 1.0 + 1e-7, 1.0, rtol=1e-8).passed

    def test_csv_dialect(self):
        text = rows_to_csv([ReportRow("s", "c", "a=1;b=2", 0.1, 0.2, True, 1.5)])
        assert "\r" not in text
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ROW_HEADER
        assert rows[1] == ["s", "c", "a=1;b=2", "0.10000000000000001", "0.20000000000000001", "pass", "1.500"]


class TestIdentities:
    def test_quadratic_passes(self):
        report, rows = run_identities(load_scenario("kfp-quadratic"))
        assert report.passed and rows and all(r.passed for r in rows)
        checks = {c.check for c in report.checks}
        assert {"gamma2 closed form", "gamma2Z closed form", "intertwining"} <= checks

    def test_tampered_fails(self):
        report, rows = run_identities(load_scenario("kfp-tampered-z"))
        bad = [c for c in report.checks if not c.passed]
        assert [c.check for c in bad] == ["intertwining"] and bad[0].counterexample
        assert any("counterexample=" in r.parameters for r in rows if not r.passed)

    def test_empty_trials_warn(self):
        cfg = variant("kfp-quadratic", **{"identities.trials": 0, "identities.intertwining_trials": 0})
        report, rows = run_identities(cfg)
        assert report.passed and report.warnings

    def test_general_mode(self):
        report, rows = run_identities(load_scenario("general-epsilon"))
        assert report.passed


class TestCertify:
    def test_quadratic_optimum(self):
        res = run_certify(load_scenario("kfp-quadratic"))
        c, r = res.certificate, res.rates
        assert c.K == -0.5 and not r.positive_branch
        assert c.eta == pytest.approx(0.499) and r.lambda_h1 == pytest.approx(2 * c.eta)
        assert c.sound() and all(row.passed for row in res.rows)

    def test_stiff_fixed_eta(self):
        res = run_certify(load_scenario("kfp-stiff"), eta=0.25)
        c, r = res.certificate, res.rates
        assert c.K == pytest.approx(8.5) and r.positive_branch
        assert r.lambda_h1 == pytest.approx(2 * 0.25 * r.kappa / (r.kappa + 0.25 + 8.5))

    def test_general(self):
        res = run_certify(load_scenario("general-epsilon"))
        assert res.scan is not None and res.scan.rho > 0
        assert 0 < res.certificate.eta < res.scan.rho
        assert all(row.passed for row in res.rows)

    def test_heisenberg_like_general(self):
        cfg = ScenarioConfig(name="heis", mode="general", names=["z1", "z2", "z3"],
                             frame={"X1": "d/dz1", "X2": "d/dz2 + z1*d/dz3", "Y": "0"},
                             Z=["d/dz3"], region_lo=[-1.0] * 3, region_hi=[1.0] * 3, grid=2,
                             kappa=1.0, decay=DecaySettings(times=[], test_functions=[], entropy_p="z1"),
                             simulate=SimulateSettings(test_functions=[]))
        res = run_certify(cfg)
        assert res.certificate.sound()
        # the jet form is feasible up to eta = 1/2 inclusive for this frame
        assert res.certificate.eta <= 0.5 + 1e-9


class TestDecay:
    def test_fast_quadratic_passes(self):
        rows = run_decay(fast())
        assert rows and all(r.passed for r in rows)
        assert {r.check for r in rows} >= {"h1-gradient", "h1-l2", "pointwise-gradient"}

    def test_doubled_rate_fails(self):
        rows = run_decay(fast(), lam_scale=2.0)
        assert any(not r.passed for r in rows)

    def test_empty_times_header_only(self, capsys, tmp_path):
        cfg = variant("kfp-quadratic", **{"decay.times": [], "decay.pointwise_times": [], "decay.entropy": False})
        assert run_decay(cfg) == []
        path = tmp_path / "s.toml"
        path.write_text(cfg.to_toml())
        out = tmp_path / "o.csv"
        code, _, _ = run_cli(capsys, "--scenario", str(path), "--out", str(out), "decay")
        assert code == 0
        assert out.read_text() == ",".join(ROW_HEADER) + "\n"


class TestSimulate:
    def test_small_run(self):
        res = run_simulate(load_scenario("kfp-quadratic"), particles=4000, dt=0.01, T=1.0)
        assert res.rows and all(r.passed for r in res.rows)
        assert any("Philox" in h for h in res.header)
        assert any("seed" in h for h in res.header)

    def test_general_rejected(self):
        with pytest.raises(ConfigError):
            run_simulate(load_scenario("general-epsilon"))


class TestCLI:
    def test_list(self, capsys):
        code, out, _ = run_cli(capsys, "list")
        assert code == 0 and out.split() == SHIPPED

    def test_missing_scenario(self, capsys):
        assert run_cli(capsys, "identities")[0] == 2
        assert run_cli(capsys, "--scenario", "nope", "identities")[0] == 2

    def test_identities_exit_codes(self, capsys):
        assert run_cli(capsys, "--scenario", "kfp-quadratic", "identities")[0] == 0
        code, _, err = run_cli(capsys, "--scenario", "kfp-tampered-z", "identities")
        assert code == 1 and "FAIL" in err

    def test_certify_csv(self, capsys):
        code, out, _ = run_cli(capsys, "--scenario", "kfp-stiff", "certify", "--eta", "0.25")
        assert code == 0
        (row,) = list(csv.DictReader(io.StringIO(out)))
        assert list(row) == ["scenario", "eta", "K", "rho", "lambda_pointwise", "lambda_h1", "lambda_entropy", "branch"]
        assert float(row["K"]) == pytest.approx(8.5) and row["branch"] == "K+eta>0"

    def test_certify_infeasible_eta(self, capsys):
        assert run_cli(capsys, "--scenario", "kfp-quadratic", "certify", "--eta", "0.7")[0] == 2

    def test_scan_epsilon(self, capsys):
        code, out, _ = run_cli(capsys, "--scenario", "general-epsilon", "scan-epsilon")
        lines = out.strip().splitlines()
        assert code == 0 and lines[0] == "epsilon,rho" and len(lines) == 8
        assert max(float(l.split(",")[1]) for l in lines[1:]) > 0

    def test_decay_determinism_and_negative_control(self, capsys, tmp_path):
        path = tmp_path / "fast.toml"
        path.write_text(fast().to_toml())
        a = run_cli(capsys, "--scenario", str(path), "--no-runtime", "decay")
        b = run_cli(capsys, "--scenario", str(path), "--no-runtime", "decay")
        assert a[0] == 0 and a[1] == b[1]
        code, _, err = run_cli(capsys, "--scenario", str(path), "decay", "--lambda-scale", "2")
        assert code == 1 and "failed" in err

    def test_seed_changes_random_pointwise_functions(self, capsys, tmp_path):
        path = tmp_path / "fast.toml"
        path.write_text(fast(**{"decay.times": []}).to_toml())
        a = run_cli(capsys, "--scenario", str(path), "--no-runtime", "decay")[1]
        b = run_cli(capsys, "--scenario", str(path), "--no-runtime", "--seed", "9", "decay")[1]
        assert a != b

    def test_runtime_column_stripped(self, capsys):
        _, out, _ = run_cli(capsys, "--scenario", "kfp-quadratic", "--no-runtime", "identities")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows and all(r["runtime_ms"] == "" for r in rows)

    def test_simulate_deterministic(self, capsys):
        args = ["--scenario", "kfp-quadratic", "--no-runtime", "simulate", "--particles", "2000",
                "--dt", "0.01", "--T", "1"]
        a, b = run_cli(capsys, *args), run_cli(capsys, *args)
        assert a[0] == 0 and a[1] == b[1] and a[1].startswith("#")
        c = run_cli(capsys, *args[:3], "--threads", "2", *args[3:])
        data = lambda text: [l for l in text.splitlines() if not l.startswith("#")]
        assert data(c[1]) == data(a[1])

    def test_report_general(self, capsys):
        assert run_cli(capsys, "--scenario", "general-epsilon", "report")[0] == 0
