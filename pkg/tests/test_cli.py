"""Command-line behavior: exit codes, output formats, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from dropaudit import DrawBundle, QoiSpec, influence_estimates, write_bundle_csv
from dropaudit.cli import main


def run(argv):
    """main() plus argparse exits folded into one return code."""
    try:
        return main(argv)
    except SystemExit as exc:
        return 0 if exc.code is None else exc.code


@pytest.fixture(scope="module")
def bundle_path(tmp_path_factory):
    rng = np.random.default_rng(11)
    g = rng.standard_normal(400) + 3.0
    ll = rng.standard_normal((400, 8)) * 0.1
    path = tmp_path_factory.mktemp("cli") / "bundle.csv"
    write_bundle_csv(str(path), DrawBundle(g_values=g, loglik=ll))
    return str(path)


class TestExitCodes:
    def test_unknown_flag_is_usage(self, bundle_path):
        assert run(["audit", bundle_path, "--qoi", "sign", "--seed", "1", "--bogus"]) == 1

    def test_missing_subcommand_is_usage(self):
        assert run([]) == 1

    def test_missing_required_model_flag_is_usage(self):
        assert run(["oracle", "normal", "--x", "0,1"]) == 1

    def test_bad_bundle_is_validation(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("g,ll_1\n1,2\n", encoding="utf-8")
        assert run(["audit", str(path), "--qoi", "sign", "--seed", "1"]) == 2

    def test_missing_file_is_validation(self, tmp_path):
        assert run(["influence", str(tmp_path / "nope.csv"), "--qoi", "sign"]) == 2

    def test_alpha_and_alphas_together_is_validation(self, bundle_path):
        code = run(
            ["audit", bundle_path, "--qoi", "sign", "--seed", "1", "--alpha", "0.01", "--alphas", "default"]
        )
        assert code == 2

    def test_qoi_and_custom_coefficients_together(self, bundle_path):
        assert run(["influence", bundle_path, "--qoi", "sign", "--c1", "1"]) == 2

    def test_no_qoi_at_all(self, bundle_path):
        assert run(["influence", bundle_path]) == 2

    def test_positive_phi_full_is_validation(self, bundle_path):
        # custom c1=+1 makes phi_full positive, which the verdict refuses
        assert run(["audit", bundle_path, "--c1", "1", "--c2", "0", "--seed", "1"]) == 2

    def test_cross_check_passes(self, capsys):
        assert run(["cross-check"]) == 0
        out = capsys.readouterr().out
        assert "12/12 checks passed" in out


class TestOracle:
    def test_normal_worked_example(self, capsys):
        assert run(["oracle", "normal", "--x", "0,1,2,9", "--sigma", "1", "--drop", "4"]) == 0
        out = capsys.readouterr().out
        assert "posterior_mean=3\n" in out
        assert "err_first=-0.5\n" in out
        assert "err_zeroth=-2\n" in out

    def test_normal_means_reports_bound(self, capsys):
        code = run(
            [
                "oracle",
                "normal-means",
                "--x", "0.1,0.2,0.3,1.4,1.5,1.6",
                "--groups", "1,1,1,2,2,2",
                "--sigma", "1",
                "--tau", "1",
                "--drop", "1",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "err_first=" in out and "error_bound=" in out and "condition_holds=" in out

    def test_normal_gamma_influence(self, capsys):
        code = run(
            ["oracle", "normal-gamma", "--x", "0,1,2,9", "--prior-shape", "2", "--prior-rate", "2", "--obs", "4"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "influence=1.5\n" in out
        assert "sigma_nn=" in out


class TestInfluence:
    def test_matches_library(self, bundle_path, capsys):
        assert run(["influence", bundle_path, "--c1", "-1", "--c2", "0"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "n,psi_hat"
        got = np.array([float(line.split(",")[1]) for line in lines[1:]])

        from dropaudit import ingest_bundle

        psi = influence_estimates(ingest_bundle(bundle_path), QoiSpec(c1=-1.0, c2=0.0))
        assert np.array_equal(got, psi)


class TestAmip:
    def test_log_grid_has_ten_rows(self, bundle_path, capsys):
        assert run(["amip", bundle_path, "--qoi", "sign", "--alphas", "0.001:0.01:log10"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 11
        alphas = [float(line.split(",")[0]) for line in lines[1:]]
        assert alphas[0] == pytest.approx(0.001)
        assert alphas[-1] == pytest.approx(0.01)

    def test_bad_grid_spec(self, bundle_path):
        assert run(["amip", bundle_path, "--qoi", "sign", "--alphas", "0.1:0.01:log10"]) == 2
        assert run(["amip", bundle_path, "--qoi", "sign", "--alphas", "a:b:c"]) == 2


class TestCi:
    @pytest.mark.parametrize(
        "extra",
        [
            ["--target", "mean"],
            ["--target", "amip", "--alpha", "0.05", "--qoi", "sign"],
            ["--target", "soi", "--indices", "1,3", "--qoi", "sign"],
        ],
    )
    def test_targets_produce_interval(self, bundle_path, capsys, extra):
        assert run(["ci", bundle_path, "--seed", "4", *extra]) == 0
        out = capsys.readouterr().out
        assert '"lb"' in out and '"ub"' in out and '"input_digest"' in out

    def test_amip_target_requires_alpha(self, bundle_path):
        assert run(["ci", bundle_path, "--seed", "4", "--target", "amip", "--qoi", "sign"]) == 2


class TestAuditDeterminism:
    def test_byte_identical_runs_and_threads(self, bundle_path, tmp_path, monkeypatch):
        common = ["audit", bundle_path, "--qoi", "sign", "--seed", "9", "--alphas", "0.005,0.02"]
        paths = [str(tmp_path / f"out{i}.json") for i in range(3)]
        assert run([*common, "--output", paths[0]]) == 0
        assert run([*common, "--output", paths[1]]) == 0
        monkeypatch.setenv("DROPAUDIT_SEED", "12345")
        assert run([*common, "--threads", "4", "--output", paths[2]]) == 0
        blobs = [open(p, "rb").read() for p in paths]
        assert blobs[0] == blobs[1] == blobs[2]
        assert b'"verdict"' in blobs[0]

    def test_csv_format(self, bundle_path, capsys):
        assert run(["audit", bundle_path, "--qoi", "sign", "--seed", "9", "--alpha", "0.01", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "alpha,budget,delta_hat,dropped,lb,ub,verdict"
        assert len(lines) == 2


class TestSample:
    def test_round_trip_and_audit(self, tmp_path, capsys):
        out = str(tmp_path / "draws.csv")
        code = run(
            ["sample", "normal", "--x", "0,1,2,9", "--sigma", "1", "--draws", "250", "--seed", "6", "--output", out]
        )
        assert code == 0

        from dropaudit import ingest_bundle

        bundle = ingest_bundle(out)
        assert bundle.n_draws == 250
        assert bundle.n_obs == 4
        capsys.readouterr()

    def test_metropolis_reports_mixing(self, tmp_path, capsys):
        out = str(tmp_path / "mh.csv")
        code = run(
            [
                "sample", "normal",
                "--x", "0,1,2,9",
                "--sigma", "1",
                "--draws", "200",
                "--seed", "6",
                "--sampler", "metropolis",
                "--burn-in", "20",
                "--output", out,
            ]
        )
        assert code == 0
        assert "lag-1 autocorrelation" in capsys.readouterr().err

    def test_metropolis_rejected_off_normal(self, tmp_path):
        code = run(
            [
                "sample", "normal-gamma",
                "--x", "0,1,2",
                "--prior-shape", "2",
                "--prior-rate", "2",
                "--draws", "50",
                "--seed", "1",
                "--sampler", "metropolis",
                "--output", str(tmp_path / "x.csv"),
            ]
        )
        assert code == 1  # flag only exists on the normal model parser


class TestExperiments:
    def test_coverage_csv_shape(self, capsys):
        code = run(
            [
                "coverage", "normal",
                "--x", "0,1,2,9,3,1",
                "--sigma", "1",
                "--qoi", "sign",
                "--chains", "4",
                "--draws", "150",
                "--alphas", "0.2",
                "--bootstrap-reps", "40",
                "--seed", "5",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "alpha,quantity,value"
        quantities = {line.split(",")[1] for line in lines[1:]}
        assert quantities == {"ground_truth_delta", "coverage_point", "coverage_lb", "coverage_ub"}

    def test_soi_coverage_fixed_indices(self, capsys):
        code = run(
            [
                "soi-coverage", "normal",
                "--x", "0,1,2,9,3,1",
                "--sigma", "1",
                "--qoi", "sign",
                "--chains", "4",
                "--draws", "150",
                "--alphas", "0.2",
                "--indices", "4",
                "--bootstrap-reps", "40",
                "--seed", "5",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "ground_truth_delta" in out

    def test_interpolate_emits_full_grid(self, capsys):
        assert run(["interpolate", "normal", "--x", "0,1,2,9", "--sigma", "1", "--alpha-star", "0.26"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "zeta,quantity,value"
        assert len(lines) == 1 + 16 * 2

    def test_figures_written(self, bundle_path, tmp_path, capsys):
        figs = str(tmp_path / "figs")
        code = run(
            ["audit", bundle_path, "--qoi", "sign", "--seed", "9", "--alpha", "0.01", "--figures", figs]
        )
        assert code == 0
        capsys.readouterr()
        assert (tmp_path / "figs" / "audit.png").exists()


class TestVersion:
    def test_version_flag(self, capsys):
        assert run(["--version"]) == 0
        assert "dropaudit" in capsys.readouterr().out
