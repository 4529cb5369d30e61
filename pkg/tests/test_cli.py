import csv
import hashlib
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from singular_sl.cli import RunConfig, main, parse_config, run
from singular_sl.errors import ConfigError


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _report(d):
    return json.loads((Path(d) / "report.json").read_text())


# -- parsing -------------------------------------------------------------------
def test_minimal_config_applies_defaults():
    cfg = parse_config("command=spectrum\npotential=zero\n")
    assert cfg == RunConfig()
    assert cfg.M == 2048 and cfg.n_max == 64 and cfg.form == "sigma_form"


def test_comments_and_whitespace():
    cfg = parse_config("# a run\n  command = inverse  # trailing\n\nM=1024\nn_max = 128\n")
    assert (cfg.command, cfg.M, cfg.n_max) == ("inverse", 1024, 128)


def test_step_potential_parses_one_jump():
    cfg = parse_config("potential=step:0.5:1.0")
    assert cfg.spec.variant == "step" and cfg.spec.params == ((0.5, 1.0 + 0j),)


@pytest.mark.parametrize("text,line,fragment", [
    ("command=spectrum\nn_max=1000\nM=2048", 2, "n_max <= M/8"),
    ("command=spectrum\nfoo=1", 2, "unknown key"),
    ("M=abc", 1, "expects an integer"),
    ("command=plot", 1, "command must be"),
    ("\n\npotential=step:2:1", 3, "potential"),
    ("command=asymptotics\nn_max=16", 2, "n_max >= 32"),
    ("just text", 1, "key=value"),
    ("criteria=12", 1, "criteria"),
])
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")
    assert fragment in str(info.value)


def test_overrides_replace_file_values():
    cfg = parse_config("M=1024\nn_max=16", [("n_max", "32")])
    assert cfg.n_max == 32
    with pytest.raises(ConfigError, match="--M"):
        parse_config("", [("M", "abc")])


def test_echo_excludes_location_and_threads():
    echo = RunConfig(output_dir="/tmp/x", workers=3).echo()
    assert "output_dir" not in echo and "workers" not in echo
    assert echo["h"] == [0.0, 0.0]


# -- runs -------------------------------------------------------------------------
def test_spectrum_zero_potential(tmp_path):
    code = main(["spectrum", "--M", "256", "--n_max", "20", "--output_dir", str(tmp_path), "--quiet"])
    assert code == 0
    rows = _read_csv(tmp_path / "spectrum_dirichlet.csv")
    assert len(rows) == 20
    assert all(abs(float(r["re"]) - math.pi * int(r["n"])) < 1e-10 for r in rows)
    rows = _read_csv(tmp_path / "spectrum_neumann.csv")
    assert all(abs(float(r["re"]) - math.pi * (int(r["n"]) - 0.5)) < 1e-10 for r in rows)
    rep = _report(tmp_path)
    assert rep["status"] == "pass" and rep["command"] == "spectrum"
    assert set(rep) >= {"config_echo", "results", "fitted_exponents", "tolerances", "pass_fail"}


def test_manifest_checksums(tmp_path):
    assert main(["spectrum", "--M", "128", "--n_max", "8", "--bc", "dirichlet",
                 "--output_dir", str(tmp_path), "--quiet"]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    names = {e["file"] for e in manifest["files"]}
    assert names == {"spectrum_dirichlet.csv", "remainders_dirichlet.csv", "report.json"}
    for e in manifest["files"]:
        data = (tmp_path / e["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == e["sha256"] and len(data) == e["bytes"]


def test_config_file_and_exit_codes(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("command=spectrum\nn_max=1000\nM=2048\n")
    assert main([str(cfg), "--quiet"]) == 2
    assert main([str(tmp_path / "missing.cfg")]) == 2
    # a file where a directory is needed
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["spectrum", "--M", "64", "--n_max", "4", "--output_dir", str(blocker / "sub"),
                 "--quiet"]) == 2


def test_numerical_failure_exit_code(tmp_path):
    # phi at M=64 for 8 rough modes misses the Riccati tolerance
    code = main(["factorize", "--potential", "fourier_random:0:8:1:3", "--M", "64",
                 "--n_max", "4", "--output_dir", str(tmp_path), "--quiet"])
    assert code == 1
    rep = _report(tmp_path)
    assert rep["status"] in ("error", "fail")


def test_factorize_outputs(tmp_path):
    code = main(["factorize", "--potential", "constant:1", "--M", "256", "--n_max", "8",
                 "--output_dir", str(tmp_path), "--quiet"])
    assert code == 0
    for name in ("u", "phi", "tau", "tilde_phi"):
        assert (tmp_path / f"{name}.csv").exists()
    rep = _report(tmp_path)
    assert rep["results"]["shift_C"] == 0 and rep["pass_fail"]["riccati_residual"]


def test_charfn_tau_form(tmp_path):
    code = main(["charfn", "--potential", "fourier_random:1:16:2:0.4", "--M", "512",
                 "--n_max", "8", "--form", "tau_form", "--n_samples", "2000",
                 "--lambda_max", "20", "--lambda_points", "21",
                 "--output_dir", str(tmp_path), "--quiet"])
    assert code == 0
    rows = _read_csv(tmp_path / "charfn_neumann.csv")
    assert len(rows) == 21 and set(rows[0]) == {"lambda", "re", "im", "series_re", "series_im"}
    assert (tmp_path / "tau_5.csv").exists()


def test_asymptotics_report(tmp_path):
    code = main(["asymptotics", "--potential", "linear:1", "--M", "512", "--n_max", "48",
                 "--output_dir", str(tmp_path), "--quiet"])
    assert code == 0
    rep = _report(tmp_path)
    assert rep["fitted_exponents"]["refined_dirichlet"] >= 1.8
    assert (tmp_path / "residual_refined_neumann.csv").exists()


@pytest.mark.slow
def test_inverse_delta_config(tmp_path):
    cfg = tmp_path / "delta.cfg"
    cfg.write_text(f"command=inverse\npotential=step:0.4:1\nM=2560\nn_max=200\n"
                   f"output_dir={tmp_path / 'out'}\n")
    assert main([str(cfg), "--quiet"]) == 0
    jumps = json.loads((tmp_path / "out" / "jumps.json").read_text())["jumps"]
    assert len(jumps) == 1
    assert abs(jumps[0]["position"] - 0.4) <= 1 / 200
    assert abs(jumps[0]["size"][0] - 1) <= 0.05


def test_repeat_runs_are_byte_identical(tmp_path):
    args = ["charfn", "--potential", "fourier_random:1:16:3:0.5", "--M", "256", "--n_max", "8",
            "--form", "tau_form", "--n_samples", "1000", "--seed", "4", "--quiet"]
    outs = []
    for w in ("1", "3"):
        d = tmp_path / w
        assert main(args + ["--workers", w, "--output_dir", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]


def test_selftest_subset(tmp_path):
    assert main(["selftest", "--criteria", "1,3", "--output_dir", str(tmp_path), "--quiet"]) == 0
    text = (tmp_path / "selftest.txt").read_text()
    assert text == "PASS criterion_1\nPASS criterion_3\n"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "singular_sl", "spectrum", "--M", "64",
                           "--n_max", "4", "--output_dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "spectrum: pass" in proc.stdout
