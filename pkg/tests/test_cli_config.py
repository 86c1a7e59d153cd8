import csv
import hashlib
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import INV_PI2
from vortexbell.cli import main
from vortexbell.config import (DEFAULT_BLOCK, KEYS, PRESETS, RunConfig, build_config, default_config,
                               parse_config)
from vortexbell.errors import ConfigurationError
from vortexbell.wdf_reconstruct import read_slice_csv
from vortexbell.wigner_analytic import QuadraturePoint, wdf_analytic

SMALL = ["--set", "grid.N=128"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


# --- configuration ----------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False).map(lambda x: round(x, 6))
configs = st.builds(
    RunConfig,
    beam_n=st.integers(-8, 8), beam_m=st.integers(0, 4), waist_um=st.floats(1, 1e3),
    grid_n=st.integers(8, 512).map(lambda k: 2 * k), extent_waists=st.floats(4, 20),
    shears=st.one_of(st.just("table1"),
                     st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=4).map(tuple)),
    noise_sigma=st.floats(0, 0.1), noise_seed=st.integers(0, 2 ** 31), noise_pedestal=st.none() | st.floats(0, 1),
    repetitions=st.integers(1, 50), output_dir=st.sampled_from(["out", "runs/a b", "x"]),
    block_mu=st.none() | st.floats(1.01, 2), block_thickness_cm=st.none() | finite,
    bell_mode=st.sampled_from(["analytic", "simulated"]),
    bell_orders=st.lists(st.integers(0, 3), min_size=1, max_size=4).map(tuple),
    bell_dimensionality=st.sampled_from(["two", "eight"]),
)


@given(configs)
def test_config_round_trip(cfg):
    text = cfg.to_text()
    back = RunConfig().with_values(parse_config(text))
    assert back == cfg
    assert back.to_text() == text


def test_every_key_serialised():
    text = default_config().to_text()
    assert [line.split(" = ")[0] for line in text.splitlines()] == list(KEYS)


def test_parse_comments_and_errors():
    assert parse_config("# hi\n\nbeam.n = 2  # trailing\n") == {"beam.n": "2"}
    with pytest.raises(ConfigurationError, match="beam.q"):
        parse_config("beam.q = 1")
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_config("beam.n = 1\nnonsense\n")


def test_invalid_values_name_the_key():
    with pytest.raises(ConfigurationError, match="grid.N"):
        RunConfig().with_values({"grid.N": "abc"})
    with pytest.raises(ConfigurationError, match="grid.N"):
        build_config(overrides={"grid.N": "15"})
    with pytest.raises(ConfigurationError, match="shears"):
        build_config(overrides={"shears": "0,0; 2.5,0"})
    with pytest.raises(ConfigurationError, match="bell.orders"):
        build_config(overrides={"bell.orders": "1,4"})


def test_precedence(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("beam.n = 2\nrepetitions = 3\n")
    cfg = build_config(path, "fig5", {"repetitions": "7"})
    assert cfg.beam_n == 2                  # file over default
    assert cfg.noise_sigma == 0.01          # preset
    assert cfg.repetitions == 7             # flag over file over preset
    assert cfg.block_mu is None             # files carry their own block keys


def test_defaults_carry_block():
    cfg = build_config()
    assert (cfg.block_mu, cfg.block_thickness_cm, cfg.block_arm_cm) == tuple(float(v) for v in DEFAULT_BLOCK.values())


def test_presets_valid():
    for name in PRESETS:
        build_config(preset=name)
    with pytest.raises(ConfigurationError, match="preset"):
        build_config(preset="fig9")


def test_table1_shears_expand():
    cfg = build_config(overrides={"beam.n": "1"})
    assert cfg.shear_list() == [(-0.07, -0.05), (-0.07, 0.26), (0.4, -0.05), (0.4, 0.26)]
    with pytest.raises(ConfigurationError):
        build_config(overrides={"beam.n": "5"}).shear_list()


def test_require():
    with pytest.raises(ConfigurationError, match="block.mu"):
        RunConfig().require("block.mu")


# --- calibrate --------------------------------------------------------------

def test_calibrate_default(tmp_path, capsys):
    assert main(["calibrate", "--out", str(tmp_path)]) == 0
    curve = rows(tmp_path / "calibration_curve.csv")
    assert len(curve) >= 11
    x = [float(r["X_shear"]) for r in curve]
    assert all(b > a for a, b in zip(x, x[1:]))
    fit = {r["quantity"]: float(r["value"]) for r in rows(tmp_path / "calibration_fit.csv")}
    expected = math.sqrt(2) / 297.6 * (1e4 / 5.2) * (1 - 1 / 1.5)
    assert fit["slope_per_cm"] == pytest.approx(expected, rel=0.005)
    assert fit["max_residual_fraction"] < 0.005
    assert (tmp_path / "calibration_curve.png").stat().st_size > 0
    assert "calibration" in capsys.readouterr().out


def test_calibrate_missing_mu(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("block.thickness_cm = 1\nblock.arm_cm = 5.2\n")
    assert main(["calibrate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "block.mu" in capsys.readouterr().err


@pytest.mark.parametrize("setting, field", [("block.mu=2.5", "refractive index"), ("block.points=1", "block.points"),
                                            ("block.max_tilt_deg=95", "block.max_tilt_deg")])
def test_calibrate_bad_values(tmp_path, capsys, setting, field):
    assert main(["calibrate", "--out", str(tmp_path), "--set", setting]) == 2
    assert field in capsys.readouterr().err


# --- simulate ---------------------------------------------------------------

def test_simulate_writes_frames_and_is_deterministic(tmp_path):
    args = ["simulate", "--preset", "fig3", "--out", str(tmp_path), "--seed", "4", "--set", "noise.sigma=0.01",
            *SMALL]
    assert main(args) == 0
    first = digest(tmp_path)
    for k in range(2):
        d = tmp_path / "frames" / "rep000" / f"shear{k:02d}"
        assert sorted(p.name for p in d.iterdir()) == ["i_ccw.pgm", "i_cw.pgm", "i_phase0.pgm", "i_phase90.pgm",
                                                        "sidecar.txt"]
    assert main(args) == 0
    assert digest(tmp_path) == first


def test_simulate_repetitions_distinct(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--set", "grid.N=32", "--set", "repetitions=25",
                 "--set", "noise.sigma=0.01", "--set", "shears=0,0"]) == 0
    sets = sorted((tmp_path / "frames").glob("rep*/shear00"))
    assert len(sets) == 25
    seeds = {(d / "sidecar.txt").read_text().split("seed = ")[1].split()[0] for d in sets}
    assert len(seeds) == 25
    frames = {(d / "i_cw.pgm").read_bytes() for d in sets}
    assert len(frames) == 25
    assert len(rows(tmp_path / "frames_index.csv")) == 25


def test_simulate_parallel_matches_serial(tmp_path):
    base = ["simulate", "--set", "grid.N=32", "--set", "repetitions=3", "--set", "noise.sigma=0.01"]
    assert main([*base, "--out", str(tmp_path / "a")]) == 0
    assert main([*base, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    a.pop("config.txt"), b.pop("config.txt")
    assert a == b


def test_simulate_shear_out_of_range(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "shears=3,0"]) == 2
    assert "shears" in capsys.readouterr().err


# --- reconstruct ------------------------------------------------------------

@pytest.fixture(scope="module")
def reconstructed(tmp_path_factory):
    out = tmp_path_factory.mktemp("rec")
    for n in (0, 1):
        assert main(["simulate", "--out", str(out), "--set", f"beam.n={n}", "--set", "shears=0,0; 0.2,0",
                     "--set", "grid.N=256", "--set", f"noise.seed={n}"]) == 0
        (out / "frames").rename(out / f"frames_n{n}")
    return out


def test_reconstruct_gaussian_and_vortex(reconstructed):
    for n, sign in ((0, 1), (1, -1)):
        out = reconstructed / f"out{n}"
        assert main(["reconstruct", "--out", str(out), "--frames", str(reconstructed / f"frames_n{n}")]) == 0
        summary = rows(out / "reconstruct_summary.csv")
        assert [r["status"] for r in summary] == ["ok", "ok"]
        origin = summary[0]
        assert float(origin["W_origin"]) == pytest.approx(sign * INV_PI2, rel=0.01)
        assert float(origin["residual_imag"]) < 0.01 * float(origin["W_abs_max"])
        assert (out / "slices" / "rep000_shear00.png").exists()
        assert (out / "slices" / "rep000_shear00_tpcf.png").exists()


def test_reconstruct_matches_oracle(reconstructed):
    out = reconstructed / "out1"
    if not out.exists():
        main(["reconstruct", "--out", str(out), "--frames", str(reconstructed / "frames_n1")])
    sl = read_slice_csv(out / "slices" / "rep000_shear01.csv", 0.2, 0.0)
    PY, PX = np.meshgrid(sl.p_axis, sl.p_axis, indexing="ij")
    ref = wdf_analytic(1, 0, QuadraturePoint(0.2, PX, 0.0, PY))
    assert np.max(np.abs(sl.values - ref)) < 0.01 * INV_PI2


def test_reconstruct_skips_corrupt_frames(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--set", "grid.N=32", "--set", "shears=0,0; 0.2,0"]) == 0
    (tmp_path / "frames" / "rep000" / "shear01" / "i_cw.pgm").write_bytes(b"junk")
    assert main(["reconstruct", "--out", str(tmp_path)]) == 0
    err = capsys.readouterr().err
    assert "warning" in err and "shear01" in err
    status = [r["status"] for r in rows(tmp_path / "reconstruct_summary.csv")]
    assert status == ["ok", "failed"]
    (tmp_path / "frames" / "rep000" / "shear00" / "i_phase0.pgm").write_bytes(b"junk")
    assert main(["reconstruct", "--out", str(tmp_path)]) == 1


def test_reconstruct_missing_frames(tmp_path, capsys):
    assert main(["reconstruct", "--out", str(tmp_path), "--frames", str(tmp_path / "nope")]) == 2
    assert "frames" in capsys.readouterr().err


# --- bell -------------------------------------------------------------------

def test_bell_analytic_two_deterministic(tmp_path):
    args = ["bell", "--set", "bell.dimensionality=two", "--set", "bell.orders=1,2"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    res = rows(tmp_path / "a" / "bell_results.csv")
    assert [r["order_n"] for r in res] == ["1", "2"]
    assert float(res[0]["abs_B_max"]) == pytest.approx(2.17, abs=0.01)
    for name in ("bell_results.csv", "bell_repetitions.csv", "bell_surface.csv", "bell_surface.png",
                 "bell_vs_order.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    surface = rows(tmp_path / "a" / "bell_surface.csv")
    assert len(surface) == 41 * 41


def test_bell_analytic_table(tmp_path):
    assert main(["bell", "--preset", "table1", "--out", str(tmp_path)]) == 0
    got = [float(r["abs_B_max"]) for r in rows(tmp_path / "bell_results.csv")]
    np.testing.assert_allclose(got, [2.00, 2.24, 2.35, 2.40], atol=0.01)


def test_bell_simulated_two_param(tmp_path):
    assert main(["bell", "--preset", "fig4", "--out", str(tmp_path), "--set", "grid.N=256"]) == 0
    res = rows(tmp_path / "bell_results.csv")
    assert float(res[0]["abs_B_max"]) == pytest.approx(2.17, abs=0.02)


def test_bell_simulated_repetitions(tmp_path):
    assert main(["bell", "--out", str(tmp_path), "--set", "bell.mode=simulated", "--set", "bell.orders=1",
                 "--set", "repetitions=3", "--set", "noise.sigma=0.01", *SMALL]) == 0
    res = rows(tmp_path / "bell_results.csv")[0]
    assert int(res["repetitions"]) == 3 and float(res["std_dev"]) > 0
    assert len(rows(tmp_path / "bell_repetitions.csv")) == 3


def test_bell_bad_shear_pattern(tmp_path, capsys):
    assert main(["bell", "--out", str(tmp_path), "--set", "bell.mode=simulated", "--set", "shears=0,0; 0.1,0.2"]) == 2
    assert "shears" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vortexbell", "calibrate", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "vortexbell", "bell", "--set", "beam.q=1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "beam.q" in proc.stderr
