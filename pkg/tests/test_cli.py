import json
import subprocess
import sys

import pytest

from heatobs import cli

GRID = {"n": 1, "side_length": 10, "samples": 128}
STRIPES = {"kind": "stripes", "axis": 0, "width": 0.5, "period": 1.0}

CONFIGS = {
    "thickness": {"grid": GRID, "set": STRIPES, "params": {"L": [1.0, 2.0], "bins": 4}},
    "spectral-sweep": {"grid": GRID, "set": STRIPES, "params": {"N": [2, 4]}},
    "obs-estimate": {"grid": GRID, "set": STRIPES, "params": {"T": [1.0], "K": 16}},
    "interpolation": {"grid": GRID, "set": STRIPES, "params": {"T": 1.0, "theta": [0.5], "probes": 2}},
    "counterexample": {"params": {"k": [5]}},
    "constants-chain": {"params": {"gamma": [0.5, 1.0], "L": 1.0, "theta": 0.5, "T": [1.0, 2.0]}},
    "audit": {"grid": {"n": 1, "side_length": 40, "samples": 1024},
              "params": {"descriptor": "PERSIST_POLY", "function": {"kind": "gaussian", "width": 1.0},
                         "inputs": {"nu": [0.5, 1.0], "t": 1.0}}},
}


def _cfg(kind, **over):
    cfg = {"schema_version": 1, "kind": kind, "seed": 0, "workers": 1, **CONFIGS[kind]}
    cfg.update(over)
    return cfg


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.mark.parametrize("kind", cli.KINDS)
def test_every_kind_runs(tmp_path, kind):
    code = cli.main([kind, "--config", _write(tmp_path, _cfg(kind)), "--out", str(tmp_path / "o")])
    text = (tmp_path / "o" / f"{kind}.csv").read_text().splitlines()
    assert text[0].startswith("id,") and text[0].endswith(",flags")
    if kind == "constants-chain":
        # e^{ln C_obs} exceeds double range: flagged, exact log kept
        assert code == 3 and all(line.endswith(",OVERFLOW") for line in text[1:])
    else:
        assert code == 0 and all(line.endswith(",OK") for line in text[1:])
    meta = json.loads((tmp_path / "o" / f"{kind}.meta.json").read_text())
    assert meta["kind"] == kind
    plot = cli.main(["plot-data", "--report", str(tmp_path / "o" / f"{kind}.csv"), "--out", str(tmp_path / "p")])
    assert plot == 0
    lines = (tmp_path / "p" / f"{kind}.plot.dat").read_text().splitlines()
    assert lines[0] == "# " + " ".join(cli.PLOT_COLUMNS[kind])
    assert len(lines) == len(text)


def test_sweep_expands_cartesian(tmp_path):
    cli.main(["constants-chain", "--config", _write(tmp_path, _cfg("constants-chain")), "--out", str(tmp_path)])
    rows = (tmp_path / "constants-chain.csv").read_text().splitlines()
    assert len(rows) == 1 + 4


def test_byte_determinism_across_workers(tmp_path):
    cfg = _write(tmp_path, _cfg("spectral-sweep", params={"N": [2, 3, 4]}))
    cli.main(["spectral-sweep", "--config", cfg, "--out", str(tmp_path / "a"), "--workers", "1"])
    cli.main(["spectral-sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2"])
    a = (tmp_path / "a" / "spectral-sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "spectral-sweep.csv").read_bytes()


def test_seed_override_changes_only_seeded_kinds(tmp_path):
    cfg = _write(tmp_path, _cfg("interpolation"))
    cli.main(["interpolation", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["interpolation", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "1"])
    assert (tmp_path / "a" / "interpolation.csv").read_bytes() == (tmp_path / "b" / "interpolation.csv").read_bytes()


@pytest.mark.parametrize("mutate, field", [
    (lambda c: c.update(schema_version=2), "schema_version"),
    (lambda c: c.update(extra=1), "unknown key"),
    (lambda c: c["params"].update(N="x"), "params.N"),
    (lambda c: c["params"].update(bogus=1), "params"),
    (lambda c: c["set"].update(radius=1), "set"),
    (lambda c: c.update(grid={"n": 1, "side_length": 10}), "grid"),
    (lambda c: c.update(seed=-1), "seed"),
    (lambda c: c.update(kind="nope"), "kind"),
])
def test_config_errors_exit_2(tmp_path, capsys, mutate, field):
    cfg = json.loads(json.dumps(_cfg("spectral-sweep")))
    mutate(cfg)
    code = cli.main(["spectral-sweep", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert field in capsys.readouterr().err


def test_audit_config_errors(tmp_path):
    bad_knob = _cfg("audit")
    bad_knob["params"] = dict(bad_knob["params"], knobs={"C": 2.0})
    assert cli.main(["audit", "--config", _write(tmp_path, bad_knob), "--out", str(tmp_path)]) == 2
    bad_desc = _cfg("audit")
    bad_desc["params"] = dict(bad_desc["params"], descriptor="NOPE")
    assert cli.main(["audit", "--config", _write(tmp_path, bad_desc), "--out", str(tmp_path)]) == 2


def test_flagged_rows_exit_3(tmp_path):
    # the width-0.25 Gaussian is not in the a=0.5 spectral weight space
    cfg = _cfg("audit", params={"descriptor": "RING_CHAIN", "function": {"kind": "gaussian", "width": 0.25},
                                "inputs": {"a": 0.5, "j": [1, 2]}})
    assert cli.main(["audit", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 3
    rows = (tmp_path / "audit.csv").read_text().splitlines()[1:]
    assert all(r.endswith("PreconditionFailed") for r in rows)


def test_margin_below_one_flagged(tmp_path):
    cfg = _cfg("audit", grid={"n": 1, "side_length": 40, "samples": 1024},
               params={"descriptor": "SERIES_SUM", "inputs": {"a": 10.0, "b": 1e-12, "theta": 0.99,
                                                               "gamma_argument": "stated"}})
    assert cli.main(["audit", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 3
    assert cli.MARGIN_BELOW_ONE in (tmp_path / "audit.csv").read_text()


def test_plot_data_empty_report(tmp_path):
    rep = tmp_path / "thickness.csv"
    rep.write_text("id,L,gamma_min,flags\n")
    assert cli.main(["plot-data", "--report", str(rep), "--out", str(tmp_path)]) == 2
    assert cli.main(["plot-data", "--report", str(tmp_path / "missing.csv"), "--out", str(tmp_path),
                     "--kind", "thickness"]) == 2


def test_workers_env(monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli.default_workers() == 3
    monkeypatch.setenv(cli.WORKERS_ENV, "zero")
    with pytest.raises(cli.ConfigError):
        cli.default_workers()
    monkeypatch.delenv(cli.WORKERS_ENV)
    assert cli.default_workers() >= 1


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, _cfg("constants-chain"))
    res = subprocess.run([sys.executable, "-m", "heatobs", "constants-chain", "--config", cfg,
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 3, res.stderr
    assert "OVERFLOW" in (tmp_path / "constants-chain.csv").read_text()
