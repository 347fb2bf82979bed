import csv
import io
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hermvar import derive_seed
from hermvar.bounds import fit_exponent
from hermvar.cli import RunConfig, main, parse_n_grid, resolve
from hermvar.errors import ConfigError


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# hermvar-csv v1 ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_sigma_brownian(capsys):
    code, out, _ = run_cli(capsys, "sigma", "--H", "0.5", "--q", "2")
    assert code == 0
    (row,) = read_csv(out)
    assert float(row["sigma_sq"]) == 2.0
    assert float(row["tail_bound"]) == 0.0


def test_residual_csv_and_slope(capsys):
    code, out, _ = run_cli(capsys, "residual", "--H", "0.65", "--n-grid", "256:8192:dyadic")
    assert code == 0
    rows = read_csv(out)
    ns = [int(r["n"]) for r in rows]
    assert ns == [256, 512, 1024, 2048, 4096, 8192]
    fit = fit_exponent((int(r["n"]), float(r["residual_second_moment"])) for r in rows)
    assert all(float(r["fitted_slope"]) == fit.slope for r in rows)
    assert float(rows[0]["predicted_exponent"]) == pytest.approx(-0.7)


def test_json_format(capsys):
    code, out, _ = run_cli(capsys, "bounds", "--lemma", "beta_double", "--H", "0.6", "--a", "2",
                           "--n-grid", "128,256,512", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["subcommand"] == "bounds"
    assert [r["n"] for r in doc["rows"]] == [128, 256, 512]
    assert doc["summary"]["fit"]["slope"] == pytest.approx(-1.4, abs=0.1)


def test_manifest_rerun_is_bit_exact(tmp_path, capsys):
    out1 = tmp_path / "a.csv"
    args = ["rate", "--H", "0.6", "--q", "2", "--n-grid", "32:256:dyadic", "--N", "300",
            "--seed", "77", "--workers", "1"]
    assert main(args + ["--output", str(out1)]) == 0
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["config"]["master_seed"] == 77
    assert manifest["version"]
    assert manifest["wall_time"] >= 0
    out2 = tmp_path / "b.csv"
    assert main(["rate", "--config", str(tmp_path / "a.csv.manifest.json"), "--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_worker_count_agreement(tmp_path):
    base = ["fngn", "--H", "0.65", "--q", "3", "--n-grid", "32:256:dyadic", "--N", "400", "--seed", "3"]
    assert main(base + ["--workers", "1", "--output", str(tmp_path / "w1.csv")]) == 0
    assert main(base + ["--workers", "3", "--output", str(tmp_path / "w3.csv")]) == 0
    a = read_csv((tmp_path / "w1.csv").read_text())
    b = read_csv((tmp_path / "w3.csv").read_text())
    for ra, rb in zip(a, b):
        assert abs(float(ra["estimate"]) - float(rb["estimate"])) <= 1e-12


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text("subcommand: sigma\nparameters:\n  H: 0.6\n  q: 3\nmaster_seed: 5\n")
    config = resolve(["sigma", "--config", str(cfg)])
    assert config.parameters["q"] == 3 and config.master_seed == 5
    config = resolve(["sigma", "--config", str(cfg), "--q", "2", "--seed", "9"])
    assert config.parameters["q"] == 2 and config.master_seed == 9
    assert config.parameters["H"] == 0.6


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("subcommand: sigma\nparameters:\n  H: 0.6\n  bogus: 1\n")
    code, _, err = run_cli(capsys, "sigma", "--config", str(bad))
    assert code == 2 and json.loads(err)["category"] == "config"
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"subcommand": "rate", "parameters": {"H": 0.6}}))
    code, _, _ = run_cli(capsys, "sigma", "--config", str(other))
    assert code == 2


@pytest.mark.parametrize(
    "argv,code,category",
    [
        (["sigma", "--H", "1.5"], 2, "config"),
        (["sigma"], 2, "config"),
        (["rate", "--H", "0.1", "--q", "2"], 2, "config"),
        (["rate", "--H", "0.6", "--N", "50"], 2, "config"),
        (["rate", "--H", "0.6", "--n-grid", "256:1024:dyadic"], 2, "config"),
        (["bounds", "--H", "0.6", "--lemma", "nope", "--n-grid", "64:512:dyadic"], 2, "config"),
        (["nosuch"], 2, "config"),
        (["sigma", "--H", "0.9", "--q", "2"], 3, "numeric"),
        (["sigma", "--H", "0.5", "--output", "/nonexistent/dir/x.csv"], 4, "io"),
        (["sigma", "--H", "0.5", "--config", "/nonexistent/cfg.yaml"], 4, "io"),
    ],
)
def test_exit_codes_and_machine_readable_errors(capsys, argv, code, category):
    got, _, err = run_cli(capsys, *argv)
    assert got == code
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["category"] == category and doc["exit_code"] == code and doc["message"]


def test_simulate_outputs_path_and_statistics(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--H", "0.7", "--n", "8", "--seed", "4", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert [r["k"] for r in doc["rows"]] == list(range(9))
    assert doc["rows"][0]["B"] == 0.0
    s = doc["summary"]["statistics"]
    assert s["F_n"] - s["G_n"] == pytest.approx(s["K_1"] + s["K_2"], abs=1e-12)


def test_remaining_subcommands_run(capsys):
    for argv in (["breuer-major", "--H", "0.6", "--n", "128", "--N", "300"],
                 ["stable", "--H", "0.6", "--n", "64", "--N", "200"],
                 ["rate", "--H", "0.6", "--n-grid", "32:256:dyadic", "--N", "200", "--coupled", "0"]):
        code, out, _ = run_cli(capsys, *argv)
        assert code == 0
        assert read_csv(out)


def test_parse_n_grid():
    assert parse_n_grid("256:2048:dyadic") == [256, 512, 1024, 2048]
    assert parse_n_grid("3,5,9") == [3, 5, 9]
    assert parse_n_grid([8, 16]) == [8, 16]
    for bad in ("256:1000:dyadic", "256:2048:linear", "a,b", "8:4:dyadic"):
        with pytest.raises(ConfigError):
            parse_n_grid(bad)


params = st.fixed_dictionaries({
    "H": st.floats(0.01, 0.99),
    "q": st.integers(2, 6),
    "n_grid": st.lists(st.integers(1, 2**20), min_size=1, max_size=6),
    "method": st.sampled_from(["circulant", "cholesky"]),
})


@given(st.sampled_from(["rate", "fngn", "stable", "simulate"]), params, st.integers(0, 2**64 - 1),
       st.integers(1, 64), st.one_of(st.none(), st.text(min_size=1, max_size=20)),
       st.sampled_from(["csv", "json"]))
def test_manifest_round_trip(sub, p, seed, workers, out, fmt):
    config = RunConfig(sub, p, seed, workers, out, fmt)
    assert RunConfig.parse(config.emit()) == config


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hermvar", "sigma", "--H", "0.5", "--q", "3"],
                          capture_output=True, text=True, check=True)
    assert read_csv(proc.stdout)[0]["sigma_sq"] == "6.0"


def test_derive_seed_reexported():
    assert derive_seed(1, 1, 1) == derive_seed(1, 1, 1)
