import json

import pytest

from svolterra.cli import main


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["study", "--scheme", "rk4"])
    assert exc.value.code == 1


def test_unknown_preset_exit_code(capsys):
    code = main(["study", "--preset", "nope", "--steps", "8,16", "--nfine", "32", "--paths", "4"])
    assert code == 1
    assert "unknown preset" in capsys.readouterr().err


def test_study_writes_csv_and_returns_zero(tmp_path, capsys):
    out = tmp_path / "report.csv"
    code = main([
        "study", "--preset", "gbm", "--mu", "0", "--sigma", "1", "--x0", "1",
        "--scheme", "theta_em", "--theta", "0", "--nfine", "64",
        "--steps", "8,16,32", "--paths", "16", "--p", "2", "--seed", "42",
        "--oracle", "analytic_gbm", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "h,error,stderr"
    assert lines[-1].startswith("# rate=")


def test_study_stdout_when_no_out(capsys):
    code = main([
        "study", "--preset", "gbm", "--nfine", "32", "--steps", "8,16",
        "--paths", "8", "--seed", "1", "--oracle", "analytic_gbm",
    ])
    assert code == 0
    assert capsys.readouterr().out.startswith("h,error,stderr")


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = {
        "preset": "gbm",
        "params": {"mu": 0.0, "sigma": 1.0, "x0": 1.0},
        "stepsizes": [8, 16],
        "n_fine": 32,
        "n_paths": 8,
        "seed": 9,
        "oracle": "analytic_gbm",
    }
    cfg_file = tmp_path / "study.json"
    cfg_file.write_text(json.dumps(cfg))
    out = tmp_path / "r.csv"
    code = main(["study", "--config", str(cfg_file), "--seed", "10", "--out", str(out)])
    assert code == 0
    assert "seed=10" in out.read_text()


def test_assert_flag_failure_exit_code(tmp_path):
    # two coarse stepsizes with few paths: the fitted slope of a sigma=0
    # deterministic drift run against the analytic value is ~1, far from
    # the EM theory 0.5, so --assert must exit 3
    code = main([
        "study", "--preset", "gbm", "--mu", "1.0", "--sigma", "0.0",
        "--nfine", "32", "--steps", "4,8,16", "--paths", "4", "--seed", "2",
        "--oracle", "analytic_gbm", "--assert", "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 3


@pytest.mark.filterwarnings("ignore:overflow encountered")
@pytest.mark.filterwarnings("ignore:invalid value encountered")
def test_numerical_failure_exit_code(tmp_path, capsys):
    # mu=1e9 makes the explicit drift blow past float64 within a few steps
    code = main([
        "study", "--preset", "gbm", "--mu", "1e9", "--sigma", "0.0",
        "--nfine", "64", "--steps", "16,32", "--paths", "4", "--seed", "0",
        "--oracle", "fine_reference", "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_holder_command(tmp_path):
    out = tmp_path / "holder.csv"
    code = main([
        "holder", "--preset", "gbm", "--nfine", "256", "--paths", "8",
        "--pairs", "64", "--seed", "3", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "lag_time,mean_square_increment"
    assert lines[-1].startswith("# exponent=")


def test_moments_command(capsys):
    code = main([
        "moments", "--preset", "gbm", "--steps", "8,16", "--paths", "8", "--seed", "4",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("n_steps,moment")
    assert "# ratio=" in out


def test_validate_command(capsys):
    code = main(["validate", "--preset", "paper_example", "--alpha", "0.3", "--beta", "0.1",
                 "--probes", "256", "--seed", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "drift lipschitz estimate" in out
    assert "hint violated:                False" in out
