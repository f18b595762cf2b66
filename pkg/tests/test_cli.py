"""Tests for the command line front end.

The contract under test is behavioural: exit codes (0 success, 1
solver or check failure, 2 config problems), the artifact set a run
leaves behind, strict rejection of unknown sections and keys, the
NONLOCAL_OUT override, and byte determinism of the CSV outputs.  Most
cases drive main() in process; one subprocess case proves the module
is invocable as `python -m nlevo.cli`.
"""

import json
import os
import subprocess
import sys
from importlib import resources

import pytest

from nlevo.cli import main


def scenario_path(name):
    return str(resources.files("nlevo") / "scenarios" / name)


def write_cfg(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


MINIMAL = """
[kernel]
family = fractional
alpha = 0.5

[operator]
theta = 1.0
gamma_pow = 1.0
modes = 2

[initial_data]
first_mode = 1.0

[time]
horizon = 1.0
steps = 32
"""


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    target = tmp_path / "out"
    monkeypatch.setenv("NONLOCAL_OUT", str(target))
    return target


def read_manifest(outdir):
    with open(outdir / "manifest.json") as fh:
        return json.load(fh)


class TestRunScenarios:
    def test_fractional_linear_bundled(self, outdir):
        assert main(["run", scenario_path("fractional_linear.cfg")]) == 0
        for name in (
            "trajectory.csv",
            "envelope.csv",
            "relaxation_mode1.csv",
            "manifest.json",
            "trajectory.png",
            "envelope.png",
        ):
            assert (outdir / name).exists(), name
        manifest = read_manifest(outdir)
        assert manifest["status"] == "ok"
        assert manifest["checks"]["residual"]["passed"] is True
        assert manifest["checks"]["residual"]["max_residual"] <= 1e-8
        assert manifest["checks"]["envelope"]["violations"] == 0

    def test_two_term_stable_bundled(self, outdir):
        assert main(["run", scenario_path("two_term_stable.cfg")]) == 0
        manifest = read_manifest(outdir)
        env = manifest["checks"]["envelope"]
        assert env["passed"] is True
        assert env["terminal_ratio"] < 0.9
        # default margin splits the gap: rate = (pi^2 - 0.5 pi^2) / 2
        assert env["mu"] == pytest.approx(0.25 * 3.141592653589793**2)
        small = manifest["smallness"]
        assert small["gain"] == pytest.approx(0.5 * 3.141592653589793**2)
        assert 0.0 < small["delta"] < small["eta"]

    def test_csv_determinism(self, tmp_path, monkeypatch):
        blobs = []
        for tag in ("a", "b"):
            target = tmp_path / tag
            monkeypatch.setenv("NONLOCAL_OUT", str(target))
            assert main(["run", scenario_path("fractional_linear.cfg")]) == 0
            blobs.append(
                tuple(
                    (target / n).read_bytes()
                    for n in ("trajectory.csv", "envelope.csv", "relaxation_mode1.csv")
                )
            )
        assert blobs[0] == blobs[1]

    def test_trajectory_header_and_manifest_echo(self, outdir):
        assert main(["run", scenario_path("fractional_linear.cfg")]) == 0
        with open(outdir / "trajectory.csv") as fh:
            assert fh.readline().strip() == "t,norm,norm_half,u_1,u_2,u_3,u_4"
        manifest = read_manifest(outdir)
        assert manifest["config"]["kernel"]["alpha"] == "0.5"
        assert manifest["effective"]["lambda_1"] == pytest.approx(3.141592653589793**2)
        assert manifest["seed"] == 42
        assert manifest["version"]

    def test_output_directory_from_config(self, tmp_path, monkeypatch):
        monkeypatch.delenv("NONLOCAL_OUT", raising=False)
        monkeypatch.chdir(tmp_path)
        cfg = write_cfg(tmp_path, MINIMAL + "\n[output]\ndirectory = custom_dir\n")
        assert main(["run", cfg]) == 0
        assert (tmp_path / "custom_dir" / "trajectory.csv").exists()

    def test_env_var_beats_config_directory(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NONLOCAL_OUT", str(tmp_path / "env_dir"))
        monkeypatch.chdir(tmp_path)
        cfg = write_cfg(tmp_path, MINIMAL + "\n[output]\ndirectory = custom_dir\n")
        assert main(["run", cfg]) == 0
        assert (tmp_path / "env_dir" / "trajectory.csv").exists()
        assert not (tmp_path / "custom_dir").exists()


class TestRunConfigErrors:
    def test_unknown_key_exits_2_and_manifest_written(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL.replace("alpha = 0.5", "alpha = 0.5\nbogus = 1"))
        assert main(["run", cfg]) == 2
        manifest = read_manifest(outdir)
        assert manifest["status"] == "failed"
        assert "bogus" in manifest["failure_reason"]

    def test_unknown_section_exits_2(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL + "\n[extras]\nx = 1\n")
        assert main(["run", cfg]) == 2

    def test_missing_file_exits_2(self, outdir):
        assert main(["run", "/no/such/file.cfg"]) == 2
        assert "cannot read" in read_manifest(outdir)["failure_reason"]

    def test_missing_section_exits_2(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, "[kernel]\nfamily = fractional\nalpha = 0.5\n")
        assert main(["run", cfg]) == 2
        assert "missing required section" in read_manifest(outdir)["failure_reason"]

    def test_conflicting_horizon_keys(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL.replace("horizon = 1.0", "horizon = 1.0\nt = 1.0"))
        assert main(["run", cfg]) == 2

    def test_both_initial_forms_rejected(self, tmp_path, outdir):
        cfg = write_cfg(
            tmp_path,
            MINIMAL.replace("first_mode = 1.0", "first_mode = 1.0\ncoefficients = 1, 0"),
        )
        assert main(["run", cfg]) == 2

    def test_family_specific_keys_enforced(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL.replace("family = fractional", "family = distributed"))
        assert main(["run", cfg]) == 2
        assert "alpha" in read_manifest(outdir)["failure_reason"]

    def test_out_of_domain_value_exits_2(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL.replace("alpha = 0.5", "alpha = 1.5"))
        assert main(["run", cfg]) == 2
        assert "[kernel]" in read_manifest(outdir)["failure_reason"]

    def test_bad_boolean_exits_2(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL + "\n[analysis]\nenvelope = maybe\n")
        assert main(["run", cfg]) == 2

    def test_default_section_rejected(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, "[DEFAULT]\nalpha = 0.5\n" + MINIMAL)
        assert main(["run", cfg]) == 2

    def test_energy_requires_sine_basis(self, tmp_path, outdir):
        text = MINIMAL.replace(
            "theta = 1.0\ngamma_pow = 1.0\nmodes = 2", "eigenvalues = 2.0, 5.0"
        )
        text += "\n[nonlinearity]\nkind = energy\na = 1\nb = 1\nnu = 1\nh_sup = 1\n"
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg]) == 2
        assert "eigenbasis" in read_manifest(outdir)["failure_reason"]

    def test_envelope_without_gap_exits_2(self, tmp_path, outdir):
        # kappa above lambda_1 leaves no decaying comparison rate
        text = MINIMAL + "\n[nonlinearity]\nkind = global_lipschitz\nkappa = 20.0\n"
        text += "\n[analysis]\nenvelope = on\n"
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg]) == 2

    def test_theta_margin_outside_energy_kind(self, tmp_path, outdir):
        cfg = write_cfg(tmp_path, MINIMAL + "\n[analysis]\ntheta_margin = 1.0\n")
        assert main(["run", cfg]) == 2


class TestRunFailures:
    def test_solver_divergence_exits_1(self, tmp_path, outdir):
        text = MINIMAL.replace("steps = 32", "steps = 16")
        text += "\n[nonlinearity]\nkind = global_lipschitz\nkappa = 1e8\n"
        cfg = write_cfg(tmp_path, text)
        assert main(["run", cfg]) == 1
        manifest = read_manifest(outdir)
        assert manifest["status"] == "failed"
        assert manifest["failure_reason"].startswith("solver:")

    def test_gated_residual_failure_exits_1(self, tmp_path, outdir):
        # the semilinear scheme's own quadrature residual sits near
        # 1e-7 here; an absurd gate must fail the run but still leave
        # the artifacts and the manifest behind
        base = (resources.files("nlevo") / "scenarios" / "two_term_stable.cfg").read_text()
        cfg = write_cfg(tmp_path, base.replace("envelope = on", "envelope = on\nresidual_tol = 1e-12"))
        assert main(["run", cfg]) == 1
        manifest = read_manifest(outdir)
        assert manifest["failure_reason"] == "check failed: residual"
        assert manifest["checks"]["envelope"]["passed"] is True
        assert (outdir / "trajectory.csv").exists()


class TestVerify:
    @pytest.mark.parametrize("family", ["fractional", "distributed", "tempered", "two_term"])
    def test_quick_suite_passes(self, family, capsys):
        assert main(["verify", family]) == 0
        out = capsys.readouterr().out
        assert "all checks passed" in out
        assert "pc_identity" in out
        if family == "two_term":
            assert "two_regular_c1" in out

    def test_unknown_family_exits_2(self, capsys):
        assert main(["verify", "gaussian"]) == 2


class TestTables:
    def test_writes_tables(self, outdir, capsys):
        assert main(["tables", "fractional", "--mu", "2.0", "--steps", "64"]) == 0
        s_lines = (outdir / "s_fractional.csv").read_text().splitlines()
        assert s_lines[0] == "t,value"
        assert len(s_lines) == 66  # header + 65 nodes
        assert (outdir / "r_fractional.csv").exists()
        assert (outdir / "relaxation_fractional.png").exists()

    def test_bad_mu_exits_2(self, outdir):
        assert main(["tables", "fractional", "--mu", "-1.0", "--steps", "64"]) == 2

    def test_bad_steps_exits_2(self, outdir):
        assert main(["tables", "fractional", "--mu", "1.0", "--steps", "0"]) == 2


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        env = dict(os.environ, NONLOCAL_OUT=str(tmp_path / "out"))
        proc = subprocess.run(
            [sys.executable, "-m", "nlevo.cli", "run", scenario_path("fractional_linear.cfg")],
            capture_output=True,
            text=True,
            env=env,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0

    def test_no_arguments_exits_2(self, capsys):
        assert main([]) == 2
