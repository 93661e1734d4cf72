import json

import jsonschema
import pytest

from transition_response.cli import main
from transition_response.io import OutputBundle, csv_text, jsonable, load_schema, read_csv


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def _validate(path, name):
    jsonschema.validate(_load(path), load_schema(name))


def test_jsonable_handles_numpy():
    import numpy as np

    out = jsonable({"a": np.float64(1.5), "b": np.arange(3), 2.0: (np.int64(4), np.inf)})
    assert out == {"a": 1.5, "b": [0, 1, 2], "2.0": [4, "inf"]}


def test_csv_round_trip(tmp_path):
    meta = {"tool": "t", "seed": 3, "config": {"alpha": 0.8}}
    p = tmp_path / "t.csv"
    p.write_text(csv_text(["n", "v"], [(1, 0.1), (2, 1 / 3)], meta))
    m, header, rows = read_csv(p)
    assert m == meta and header == ["n", "v"]
    assert float(rows[1][1]) == 1 / 3


def test_bundle_is_atomic(tmp_path):
    b = OutputBundle(tmp_path / "o")
    b.add("a.txt", "x")
    b.add("b.txt", "y")
    b.commit()
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["a.txt", "b.txt"]


def test_zeta_command(tmp_path, capsys):
    assert main(["zeta", "--s", "2,1.001", "--out", str(tmp_path)]) == 0
    data = _load(tmp_path / "zeta.json")
    _validate(tmp_path / "zeta.json", "zeta")
    assert data["values"][0]["zeta"] == pytest.approx(1.6449340668482264, rel=1e-15)
    assert data["values"][1]["pole_product"] == pytest.approx(1 + 0.5772156649e-3, abs=1e-6)
    assert "zeta(2.0, 1.0)" in capsys.readouterr().out


def test_zeta_domain_exit_1(tmp_path):
    out = tmp_path / "z"
    assert main(["zeta", "--s", "0.5", "--out", str(out)]) == 1
    assert not out.exists()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"density": {"alpha": 1.0, "colour": "red"}}))
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "density", "--out", str(out)]) == 1
    assert not out.exists()


def test_malformed_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["--config", str(cfg), "zeta"]) == 1


def test_usage_error():
    assert main(["density", "--grid-size", "many"]) == 1
    assert main([]) == 1


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"global": {"seed": 11}, "zeta": {"s": [3.0]}}))
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "zeta", "--s", "4", "--seed", "5",
                 "--out", str(out)]) == 0
    data = _load(out / "zeta.json")
    assert data["values"][0]["s"] == 4.0
    assert data["meta"]["seed"] == 5


def test_density_command(tmp_path):
    assert main(["--format", "csv", "density", "--alpha", "1", "--out", str(tmp_path)]) == 0
    _validate(tmp_path / "density.json", "density")
    d = _load(tmp_path / "density.json")
    assert d["h_half"] == pytest.approx(1.2481421944050584, rel=1e-8)
    assert d["rho_half"] == 2 * d["h_half"]
    meta, header, rows = read_csv(tmp_path / "density.csv")
    assert header == ["x", "h_tilde", "rho"] and len(rows) == 1024
    assert meta["config"]["alpha"] == 1.0 and meta["version"]


def test_density_ulam(tmp_path):
    assert main(["density", "--alpha", "0.8", "--ulam", "--ulam-cells", "1024",
                 "--out", str(tmp_path)]) == 0
    d = _load(tmp_path / "density.json")
    _validate(tmp_path / "density.json", "density")
    assert 0 < d["ulam"]["l1_gap"] < 5e-3


def test_density_failure_exit_2(tmp_path):
    out = tmp_path / "o"
    assert main(["density", "--alpha", "1", "--max-iter", "2", "--out", str(out)]) == 2
    assert [p.name for p in out.iterdir()] == ["error.json"]
    _validate(out / "error.json", "error")
    assert _load(out / "error.json")["error"]["type"] == "NonConvergence"


def test_tails_command(tmp_path):
    assert main(["tails", "--alpha", "0.8", "--out", str(tmp_path)]) == 0
    _validate(tmp_path / "tails.json", "tails")
    d = _load(tmp_path / "tails.json")
    assert d["fitted_exponent"] == pytest.approx(1.25, rel=0.02)
    assert d["kac"]["finite"]


def test_tails_empty_window(tmp_path):
    assert main(["tails", "--alpha", "1", "--n-window", "500,500", "--out",
                 str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_response_single_point(tmp_path):
    assert main(["response", "--potential", "x", "--potential", "const", "--alpha-grid",
                 "0.9375", "--srb-k-max", "20000", "--out", str(tmp_path)]) == 0
    _validate(tmp_path / "response.json", "response")
    d = _load(tmp_path / "response.json")
    x, c = d["curves"]
    assert x["derivative"]["flag"] == "single_point_no_extrapolation"
    assert c["analytic_target"] == 0.0


def test_simulate_command(tmp_path):
    args = ["--format", "csv", "--seed", "7", "simulate", "--alpha", "0.8", "--n-steps",
            "20000", "--n-orbits", "3", "--bins", "8", "--out", str(tmp_path)]
    assert main(args) == 0
    _validate(tmp_path / "simulate.json", "simulate")
    first = (tmp_path / "ensemble.csv").read_text()
    assert main(args) == 0
    assert (tmp_path / "ensemble.csv").read_text() == first
    meta, header, rows = read_csv(tmp_path / "ensemble.csv")
    assert header == ["orbit_id", "time_average"] and len(rows) == 3
    assert meta["seed"] == 7


def test_simulate_esslim(tmp_path):
    assert main(["simulate", "--mode", "esslim", "--potential", "const", "--n-orbits", "2",
                 "--n-schedule", "1000,2000", "--out", str(tmp_path)]) == 0
    d = _load(tmp_path / "simulate.json")
    _validate(tmp_path / "simulate.json", "simulate")
    assert all(r["median"] == 0.0 for r in d["rows"])


def test_reproduce_subset(tmp_path, capsys):
    assert main(["reproduce", "--checks", "1,10", "--out", str(tmp_path)]) == 0
    _validate(tmp_path / "acceptance.json", "acceptance")
    out = capsys.readouterr().out
    assert "[  1]" in out and "[ 10]" in out


def test_reproduce_unknown_check():
    assert main(["reproduce", "--checks", "42"]) == 1
