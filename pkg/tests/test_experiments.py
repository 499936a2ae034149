import csv
import math
import os

import numpy as np
import pytest

from symbiris.experiments import cli
from symbiris.experiments.config import (
    ConfigError,
    ExperimentConfig,
    dbm_to_watts,
    parse_config,
    parse_config_text,
)
from symbiris.experiments.runner import (
    audit,
    generate_channel_files,
    mp_check_rows,
    point_channels,
    rank_table_rows,
    run_experiment,
)
from symbiris.channels import read_channel_set
from symbiris.types import Status

SMALL = """
scenario: SweepK
policies: [AO, LowComplexity, RandomBeam, NoRIS]
seeds: [0, 1]
sweep: {K: [2, 4]}
"""


def test_empty_config_gives_defaults():
    cfg = parse_config_text("")
    assert cfg.scenario == "SweepK" and cfg.policies == ("AO",) and cfg.seeds == (0,)
    s = cfg.system
    assert (s.M, s.N1, s.N2, s.K, s.L, s.alpha, s.R_s, s.gamma) == (3, 3, 3, 16, 50, 1.0, 5.0, 1.0)
    assert s.sigma2 == pytest.approx(1e-12)
    links = cfg.geometry.links
    assert [links[n].distance for n in ("h1", "h2", "h3", "g1", "g2")] == [1000, 200, 2, 999, 199]
    assert cfg.geometry.beta_db == 40 and cfg.geometry.gamma_e == 2 and cfg.geometry.spacing_ratio == 0.5
    assert all(l.kappa == 1 for l in links.values())
    assert cfg.points() == [s]


def test_dbm_conversion():
    assert dbm_to_watts(-90) == pytest.approx(1e-12)
    assert parse_config_text("system: {sigma2_dbm: -80}").system.sigma2 == pytest.approx(1e-11)
    assert parse_config_text("system: {sigma2_w: 2.0e-12}").system.sigma2 == 2e-12


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'bogus'"):
        parse_config_text("scenario: SweepK\nsystem:\n  bogus: 1\n")
    with pytest.raises(ConfigError, match="unknown key 'extra'"):
        parse_config_text("extra: 1")


@pytest.mark.parametrize("text, match", [
    ("scenario: Nope", "scenario"),
    ("policies: [AO, Magic]", "unknown policies"),
    ("seeds: []", "nonempty"),
    ("sweep: {R_s: [1, 2]}", "sweeps 'K'"),
    ("sweep: {K: [128]}", "max_K"),
    ("system: {M: 9}", "max_antennas"),
    ("system: {sigma2_dbm: -90, sigma2_w: 1.0e-12}", "either"),
    ("colocated: true\nsystem: {N1: 3, N2: 2}", "N1 == N2"),
    ("system: {K: 0}", "positive"),
    ("geometry: {links: {h1: {distance: -1}}}", "distance"),
    ("system: [1, 2]", "must be a mapping"),
    ("a: [", "cannot parse"),
])
def test_invalid_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_config_forms():
    cfg = parse_config_text(
        "scenario: SweepRate\npolicies: AO, NoRIS\nseeds: {start: 3, count: 2}\n"
        "sweep: {R_s: [1, 2.5]}\ngeometry: {kappa: inf, links: {h1: {kappa: 0, aoa: 0.5}}}\n"
        "mp: {P: 0.01, K: [0, 8]}\n"
    )
    assert cfg.policies == ("AO", "NoRIS")
    assert cfg.seeds == (3, 4)
    assert [p.R_s for p in cfg.points()] == [1, 2.5]
    assert cfg.geometry.links["h1"].kappa == 0 and cfg.geometry.links["h1"].aoa == pytest.approx(math.pi / 2)
    assert math.isinf(cfg.geometry.links["g1"].kappa)
    assert cfg.mp_P == (0.01,) and cfg.mp_K == (0, 8)


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.yaml")


def test_scenario_modifiers():
    cfg = parse_config_text("blocked_direct: true\nsystem: {K: 4}")
    ch = point_channels(cfg, cfg.system, 0)
    assert np.all(ch.H1 == 0) and np.all(ch.H2 == 0) and np.any(ch.G1 != 0)
    cfg = parse_config_text("colocated: true\nsystem: {K: 4}")
    ch = point_channels(cfg, cfg.system, 0)
    np.testing.assert_array_equal(ch.G2, ch.G1)
    np.testing.assert_array_equal(ch.H2, ch.H1)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    cfg = parse_config_text(SMALL)
    out = tmp_path_factory.mktemp("run")
    res = run_experiment(cfg, str(out / "a"), jobs=1)
    return cfg, out, res


def _read(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_run_writes_sorted_rows(small_run):
    cfg, out, res = small_run
    assert res["exit_code"] == 0
    rows = _read(res["files"]["results"])
    assert len(rows) == 2 * 2 * 4
    keys = [(int(r["K"]), cfg.policies.index(r["policy"]), int(r["seed"])) for r in rows]
    assert keys == sorted(keys)
    assert {r["status"] for r in rows} == {"Optimal"}
    summary = _read(res["files"]["summary"])
    assert len(summary) == 2 * 4
    ao = [float(r["power_w"]) for r in rows if r["policy"] == "AO" and r["K"] == "2"]
    first = next(s for s in summary if s["policy"] == "AO" and s["K"] == "2")
    assert float(first["mean_power_w"]) == pytest.approx(np.mean(ao), rel=1e-12)
    with open(res["files"]["results"], "rb") as f:
        assert f.readline().endswith(b"\r\n")
    for name in ("timings", "solutions", "sdr_report", "convergence", "slacks"):
        assert os.path.exists(res["files"][name])


def test_run_is_byte_identical_across_workers(small_run):
    cfg, out, res = small_run
    again = run_experiment(cfg, str(out / "b"), jobs=2)
    for name in ("results", "summary", "solutions", "sdr_report", "convergence", "slacks"):
        with open(res["files"][name], "rb") as f1, open(again["files"][name], "rb") as f2:
            assert f1.read() == f2.read(), name


def test_audit_round_trip_and_tamper(small_run, tmp_path):
    cfg, out, res = small_run
    assert audit(cfg, str(out / "a")) == []
    rows = _read(res["files"]["results"])
    rows[0]["power_w"] = repr(float(rows[0]["power_w"]) * (1 + 1e-6))
    os.makedirs(tmp_path / "t")
    with open(tmp_path / "t" / "results.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    os.link(res["files"]["solutions"], tmp_path / "t" / "solutions.jsonl")
    problems = audit(cfg, str(tmp_path / "t"))
    assert len(problems) == 1 and "power_w" in problems[0]


def test_rank_table_rows():
    cfg = parse_config_text("scenario: RankTable\nseeds: [0, 1]\nsystem: {M: 8, N1: 8, N2: 8}")
    rows = rank_table_rows(cfg)
    by_case = {}
    for r in rows:
        by_case.setdefault(r["case"], set()).add(r["rank"])
    assert by_case == {"without_ris": {1}, "ris_los_cascade": {2}, "ris_rician_cascade": {8}}


def test_mp_check_rows():
    cfg = parse_config_text(
        "scenario: MPCheck\nsystem: {M: 4, N1: 4, N2: 4}\nmp: {P: 1.0e-3, K: [0, 256], trials: 100}"
    )
    rows = mp_check_rows(cfg)
    assert [r["K"] for r in rows] == [0, 256]
    assert rows[0]["rate_with"] == rows[0]["rate_without"]
    for r in rows:
        assert abs(r["mc_with"] - r["rate_with"]) <= 0.05 * r["rate_with"]


def test_generate_channel_files(tmp_path):
    cfg = parse_config_text("seeds: [5]\nsweep: {K: [3]}")
    dirs = generate_channel_files(cfg, str(tmp_path))
    assert len(dirs) == 1
    back = read_channel_set(dirs[0])
    np.testing.assert_array_equal(back.H3, point_channels(cfg, cfg.points()[0], 5).H3)


# -- command line ---------------------------------------------------------------------


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense: 1\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "unknown key 'nonsense'" in capsys.readouterr().err
    assert cli.main(["run", "--policy", "Bogus", "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--jobs", "0", "--out", str(tmp_path)]) == 1
    assert cli.main(["audit", "--out", str(tmp_path / "missing")]) == 1


def test_cli_subcommands(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("system: {K: 2}\nseeds: [0, 1]\n")
    out = str(tmp_path / "o")
    assert cli.main(["run", "--config", str(conf), "--seed", "3", "--policy", "NoRIS,RandomBeam",
                     "--out", out]) == 0
    rows = _read(os.path.join(out, "results.csv"))
    assert [(r["policy"], r["seed"]) for r in rows] == [("NoRIS", "3"), ("RandomBeam", "3")]
    assert cli.main(["audit", "--config", str(conf), "--seed", "3", "--policy", "NoRIS,RandomBeam",
                     "--out", out]) == 0
    assert "0 mismatches" in capsys.readouterr().out

    conv = str(tmp_path / "conv")
    assert cli.main(["convergence", "--config", str(conf), "--seed", "0", "--out", conv]) == 0
    assert {r["policy"] for r in _read(os.path.join(conv, "results.csv"))} == {"AO"}
    assert os.path.exists(os.path.join(conv, "slacks.csv"))

    rank_conf = tmp_path / "r.yaml"
    rank_conf.write_text("system: {M: 8, N1: 8, N2: 8}\n")
    assert cli.main(["rank-table", "--config", str(rank_conf), "--out", str(tmp_path / "r")]) == 0
    assert os.path.exists(tmp_path / "r" / "rank_table.csv")

    mp_conf = tmp_path / "m.yaml"
    mp_conf.write_text("mp: {K: [0, 16], trials: 10}\n")
    assert cli.main(["mp-check", "--config", str(mp_conf), "--out", str(tmp_path / "m")]) == 0
    assert len(_read(tmp_path / "m" / "mp_check.csv")) == 2

    assert cli.main(["gen-channels", "--config", str(conf), "--out", str(tmp_path / "g")]) == 0
    assert os.path.isdir(tmp_path / "g" / "channels" / "point0_K2" / "seed1")


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
