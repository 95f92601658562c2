import filecmp
import json

import numpy as np
import pytest

from conftest import make_dataset, make_stream
from pvrise import io
from pvrise.analysis import analyze_dataset
from pvrise.errors import ConfigError, DatasetParseError, DatasetValidationError
from pvrise.feeder import default_config, simulate, single_site_config
from pvrise.model import SAMPLE_COLUMNS


@pytest.fixture(scope="module")
def small_sim():
    return simulate(default_config(n_days=3, seed=7))


def test_round_trip(small_sim, tmp_path):
    io.write_dataset(small_sim, tmp_path)
    back = io.read_dataset(tmp_path)
    assert back.site_ids == small_sim.site_ids
    assert back.config == small_sim.config
    for sid in small_sim.site_ids:
        a, b = small_sim[sid], back[sid]
        assert a.start_date == b.start_date
        np.testing.assert_array_equal(a.day, b.day)
        np.testing.assert_array_equal(a.minute, b.minute)
        for col in SAMPLE_COLUMNS:
            np.testing.assert_allclose(getattr(b, col), getattr(a, col), atol=1e-6, rtol=0)


def test_writes_are_byte_identical(small_sim, tmp_path):
    io.write_dataset(small_sim, tmp_path / "a")
    io.write_dataset(small_sim, tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    assert len(cmp.same_files) == 6


def test_header_and_formatting(small_sim, tmp_path):
    io.write_dataset(small_sim, tmp_path)
    lines = (tmp_path / "site1.csv").read_text().splitlines()
    assert lines[0] == ",".join(io.CSV_COLUMNS)
    first = lines[1].split(",")
    assert first[0] == "2017-01-01" and first[1] == "0"
    assert all(len(cell.split(".")[1]) == 6 for cell in first[2:])
    assert len(lines) == 3 * 1440 + 1


def test_empty_stream_writes_header_only(tmp_path):
    ds = make_dataset([make_stream("a", [], [])])
    io.write_dataset(ds, tmp_path)
    assert (tmp_path / "a.csv").read_text() == ",".join(io.CSV_COLUMNS) + "\n"
    back = io.read_dataset(tmp_path)
    assert len(back["a"]) == 0


def _corrupt(path, row, column, value):
    lines = path.read_text().splitlines()
    cells = lines[row].split(",")
    cells[io.CSV_COLUMNS.index(column)] = value
    lines[row] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")


def test_out_of_range_voltage_rejected(small_sim, tmp_path):
    io.write_dataset(small_sim, tmp_path)
    _corrupt(tmp_path / "site3.csv", 101, "pcc_voltage_pu", "2.000000")
    with pytest.raises(DatasetValidationError) as info:
        io.read_dataset(tmp_path)
    err = info.value
    assert err.count == 1
    path, line, reason = err.rejects[0]
    assert path.endswith("site3.csv") and line == 101 + 1
    assert "pcc_voltage_pu" in reason
    # without validation the row is loaded as-is
    assert io.read_dataset(tmp_path, validate=False)["site3"].pcc_voltage_pu.max() == 2.0


def test_missing_column(small_sim, tmp_path):
    io.write_dataset(small_sim, tmp_path)
    path = tmp_path / "site2.csv"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(",".join(l.split(",")[:-1]) for l in lines) + "\n")
    with pytest.raises(DatasetParseError) as info:
        io.read_dataset(tmp_path)
    assert info.value.line == 1
    assert "irradiance_kw_m2" in str(info.value)


def test_unparseable_cell(small_sim, tmp_path):
    io.write_dataset(small_sim, tmp_path)
    _corrupt(tmp_path / "site1.csv", 5, "net_power_kw", "abc")
    with pytest.raises(DatasetParseError) as info:
        io.read_dataset(tmp_path)
    assert info.value.line == 6 and "net_power_kw" in info.value.reason


def test_missing_config(tmp_path):
    with pytest.raises(DatasetParseError, match="feeder.json"):
        io.read_dataset(tmp_path)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        io.load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        io.load_config(bad)
    cfg = default_config().to_dict()
    cfg["sites"][0]["capacity_kw"] = -1
    bad.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError) as info:
        io.load_config(bad)
    assert "sites[0].capacity_kw" in info.value.path


def test_config_round_trip(tmp_path):
    cfg = default_config(seed=11, n_days=7)
    io.save_config(cfg, tmp_path / "c.json")
    assert io.load_config(tmp_path / "c.json") == cfg


def test_full_length_dataset(tmp_path):
    ds = simulate(default_config(n_days=160, seed=0))
    io.write_dataset(ds, tmp_path)
    back = io.read_dataset(tmp_path)
    assert len(back.site_ids) == 5
    assert {back[s].n_days for s in back.site_ids} == {160}


@pytest.fixture(scope="module")
def five_site_results(default_sim_20):
    return analyze_dataset(default_sim_20)


def test_report_files(five_site_results, tmp_path):
    written = io.write_report(five_site_results, tmp_path)
    names = sorted(p.name for p in written)
    assert len([n for n in names if n.startswith("table")]) == 4
    assert len([n for n in names if n.endswith(".dat")]) == 20
    t2 = (tmp_path / "table2_daily_beta.txt").read_text().splitlines()
    assert t2[0] == "Daily statistics of beta"
    caps = t2[1].split()[-5:]
    # columns run from the highest impedance site down
    assert caps == ["1.94", "3.87", "7.31", "11.61", "9.24"]
    for row in t2[2:]:
        assert all(len(c.split(".")[1]) == 4 for c in row.split()[-5:])
    t4 = (tmp_path / "table4_entropy.txt").read_text().splitlines()
    assert all(len(c.split(".")[1]) == 2 for c in t4[2].split()[-5:])


def test_density_file_matches_estimate(five_site_results, tmp_path):
    io.write_report(five_site_results, tmp_path)
    r = five_site_results[0]
    data = np.loadtxt(tmp_path / f"density_daily_{r.site_id}.dat")
    assert data.shape == (512, 2)
    np.testing.assert_allclose(data[:, 1], r.daily_density.values, rtol=1e-9)


def test_single_site_report(tmp_path):
    ds = simulate(single_site_config(n_days=10, seed=2))
    io.write_report(analyze_dataset(ds), tmp_path)
    table = (tmp_path / "table1_profile.txt").read_text().splitlines()
    assert table[1].split()[-1] == "1.94"
    assert table[2].split()[-1] == "0.077"
    assert len(table[2].split()) == 3


def test_results_json(five_site_results, tmp_path):
    path = io.write_results_json(five_site_results, tmp_path, 0.906)
    data = json.loads(path.read_text())
    assert data["irradiance_slope"] == 0.906
    assert [s["site_id"] for s in data["sites"]] == [r.site_id for r in five_site_results]
