import subprocess
import sys

import numpy as np
import pytest

from mollow import AtomParams, SimConfig, mhz, simulate_hbt
from mollow import io
from mollow.cli import main, parse_args


# --- file formats ----------------------------------------------------------------

def test_column_scale():
    assert io.column_scale("freq_mhz") == pytest.approx(2 * np.pi * 1e6)
    assert io.column_scale("tau_ns") == 1e-9
    assert io.column_scale("power_pw") == 1e-12
    assert io.column_scale("rate_per_s") == 1.0
    assert io.column_scale("g") == 1.0


def test_csv_round_trip(tmp_path):
    path = tmp_path / "c.csv"
    cols = {"x_ns": np.linspace(0, 1, 7), "y": np.random.default_rng(0).normal(size=7)}
    io.write_csv(path, cols, comments=["hello", "k=1"])
    text = path.read_text()
    assert text.splitlines()[:3] == ["# hello", "# k=1", "x_ns,y"]
    back, comments = io.read_csv(path)
    assert comments == ["hello", "k=1"]
    for k in cols:
        np.testing.assert_array_equal(back[k], cols[k])  # repr round-trips exactly


def test_csv_needs_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# only a comment\n")
    with pytest.raises(ValueError):
        io.read_csv(path)


def test_jsonl_append(tmp_path):
    path = tmp_path / "r.jsonl"
    io.append_jsonl(path, {"a": 1}, mode="w")
    io.append_jsonl(path, {"a": 2})
    assert io.read_jsonl(path) == [{"a": 1}, {"a": 2}]


def test_timetag_round_trip(tmp_path):
    cfg = SimConfig(AtomParams(mhz(6.07), mhz(40)), n_trials=500, rng_seed=17)
    recs = simulate_hbt(cfg)
    path = tmp_path / "tags.txt"
    io.write_timetags(path, recs, cfg.pulse_length, cfg.rng_seed, cfg.n_trials)
    lines = path.read_text().splitlines()
    assert lines[0] == "#timetag-v1 pulse_ns=2000 seed=17 trials=500"
    trial, t_ns, ch = lines[1].split("\t")
    assert len(t_ns.split(".")[1]) == 3  # integer picoseconds
    back, meta = io.read_timetags(path)
    assert meta == {"pulse_length": 2e-6, "seed": 17, "n_trials": 500}
    assert back.tobytes() == recs.tobytes()


def test_timetag_without_trials_key(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("#timetag-v1 pulse_ns=2000 seed=3\n0\t12.345\t1\n")
    recs, meta = io.read_timetags(path)
    assert meta["n_trials"] is None and meta["seed"] == 3
    assert recs["t"][0] == pytest.approx(12.345e-9, abs=1e-15)
    bad = tmp_path / "bad.txt"
    bad.write_text("0\t1.000\t0\n")
    with pytest.raises(ValueError):
        io.read_timetags(bad)


# --- command line ----------------------------------------------------------------

def test_spectrum_command(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--omega-mhz", "25", "--out", str(out)]) == 0
    cols, comments = io.read_csv(out)
    assert list(cols) == ["freq_mhz", "measured_per_mhz", "ideal_per_mhz"]
    assert "model=analytic" in comments
    assert np.trapezoid(cols["ideal_per_mhz"], cols["freq_mhz"]) == pytest.approx(1, abs=0.02)


def test_spectrum_detuned_uses_numeric(tmp_path):
    out = tmp_path / "s.csv"
    main(["spectrum", "--omega-mhz", "29.4", "--delta-mhz", "-30", "--out", str(out)])
    cols, comments = io.read_csv(out)
    assert "model=numeric" in comments
    assert any(c.startswith("elastic_weight=") for c in comments)


def test_spectrum_then_fit(tmp_path):
    spec, res = tmp_path / "s.csv", tmp_path / "fit.jsonl"
    main(["spectrum", "--omega-mhz", "30", "--out", str(spec)])
    main(["fit", "spectrum", "--in", str(spec), "--out", str(res)])
    (rec,) = io.read_jsonl(res)
    assert rec["kind"] == "spectrum" and rec["names"][0] == "omega"
    assert rec["units"][0] == "MHz"
    assert rec["values"][0] == pytest.approx(30, rel=0.01)
    assert set(rec) >= {"names", "values", "sigmas", "reduced_chi2"}


def test_g2_command_and_fit(tmp_path):
    g2, res, curve = tmp_path / "g2.csv", tmp_path / "fit.jsonl", tmp_path / "curve.csv"
    main(["g2", "--omega-mhz", "42", "--out", str(g2)])
    cols, _ = io.read_csv(g2)
    assert list(cols) == ["tau_ns", "g2_windowed", "g2_numeric", "g2_analytic"]
    main(["fit", "g2", "--in", str(g2), "--out", str(res), "--curve", str(curve)])
    main(["fit", "g2", "--in", str(g2), "--y-col", "g2_analytic", "--out", str(res), "--append"])
    recs = io.read_jsonl(res)
    assert len(recs) == 2
    # the unwindowed column fitted with the windowed model: small bias only
    assert recs[1]["values"][0] == pytest.approx(42, rel=1e-3)
    assert recs[0]["values"][0] == pytest.approx(42, rel=0.01)
    assert "g2_windowed_model" in io.read_csv(curve)[0]


def test_simulate_correlate_fit(tmp_path):
    tags, hist, res = tmp_path / "t.txt", tmp_path / "h.csv", tmp_path / "f.jsonl"
    main(["simulate", "--omega-mhz", "60.7", "--trials", "20000", "--seed", "5", "--eta", "0.05",
          "--out", str(tags)])
    main(["correlate", "--in", str(tags), "--bin-ns", "1", "--taumax-ns", "100", "--out", str(hist)])
    cols, _ = io.read_csv(hist)
    assert cols["tau_ns"].size == 201 and cols["tau_ns"][100] == 0.0
    main(["fit", "g2", "--in", str(hist), "--out", str(res)])
    (rec,) = io.read_jsonl(res)
    assert rec["values"][0] == pytest.approx(60.7, rel=0.05)


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        main(["simulate", "--omega-mhz", "30", "--trials", "3000", "--seed", "42",
              "--out", str(path)])
    assert a.read_bytes() == b.read_bytes()


def test_cross_and_twoexp(tmp_path):
    cross, res = tmp_path / "x.csv", tmp_path / "f.jsonl"
    main(["cross", "--omega-mhz", "29.4", "--delta-mhz", "-30", "--taumax-ns", "200",
          "--out", str(cross)])
    cols, _ = io.read_csv(cross)
    assert cols["g"].max() > 1.5
    main(["fit", "twoexp", "--in", str(cross), "--out", str(res)])
    (rec,) = io.read_jsonl(res)
    rise, fall = rec["values"][:2]
    assert rec["units"][:2] == ["ns", "ns"]
    assert 2 <= fall / rise <= 6


def test_saturation_fit_from_csv(tmp_path):
    p = np.geomspace(0.2, 60, 20)
    gamma = mhz(6.07)
    rate = 0.0179 * gamma / 2 * p / (p + 6.3)
    path, res = tmp_path / "sat.csv", tmp_path / "f.jsonl"
    io.write_csv(path, {"power_pw": p, "rate_per_s": rate, "rate_per_s_err": 0.03 * rate})
    main(["fit", "saturation", "--in", str(path), "--out", str(res)])
    (rec,) = io.read_jsonl(res)
    assert rec["values"] == [pytest.approx(6.3, rel=1e-4), pytest.approx(0.0179, rel=1e-4)]
    assert rec["units"][0] == "pW"


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "g2.csv"
    cfg.write_text(f"# preset\nomega-mhz = 25\ntaumax_ns=50\nout={out}\n")
    args = parse_args(["g2", "--config", str(cfg)])
    assert args.omega_mhz == 25.0 and args.taumax_ns == 50.0
    args = parse_args(["g2", "--config", str(cfg), "--omega-mhz", "30"])
    assert args.omega_mhz == 30.0
    main(["g2", "--config", str(cfg)])
    assert io.read_csv(out)[0]["tau_ns"].max() == 50.0


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("omega_mhz=25\nbogus=1\n")
    with pytest.raises(SystemExit):
        parse_args(["g2", "--config", str(cfg), "--out", "x.csv"])


def test_missing_required_option():
    with pytest.raises(SystemExit):
        parse_args(["g2", "--out", "x.csv"])
    with pytest.raises(SystemExit):
        parse_args(["correlate", "--bin-ns", "1"])


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "x.csv"
    run = subprocess.run([sys.executable, "-m", "mollow.cli", "g2", "--omega-mhz", "25", "-v",
                          "--out", str(out)], capture_output=True, text=True)
    assert run.returncode == 0, run.stderr
    assert out.exists()
