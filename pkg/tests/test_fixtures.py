import csv

import pytest

from wshift import fixtures
from wshift.errors import FixtureMissing


def test_manifest_entries_exist_and_parse():
    root = fixtures.fixture_dir()
    for name, spec in fixtures.manifest().items():
        path = root / spec["expected"]
        assert path.exists(), name
        rows = list(csv.reader(path.open()))
        assert len(rows) >= 2
        for arg in spec["args"]:
            if arg.startswith("{fixtures}/"):
                assert (root / arg.split("/", 1)[1]).exists()


@pytest.mark.parametrize("name", sorted(fixtures.manifest()))
def test_fixture_passes(name):
    res = fixtures.run_fixture(name)
    assert res.passed, res.message


def test_run_all():
    results = fixtures.run_all()
    assert [r.name for r in results] == list(fixtures.manifest())
    assert all(r.passed for r in results)


def test_golden_values():
    root = fixtures.fixture_dir()
    (row,) = csv.DictReader((root / "toy_w_v.expected.csv").open())
    assert float(row["estimate"]) == 5.0 and float(row["sigma2_hat"]) == 4.0
    (row,) = csv.DictReader((root / "mar_toy.expected.csv").open())
    assert float(row["estimate"]) == pytest.approx(13 / 3, abs=1e-15)


def test_unknown_fixture():
    with pytest.raises(FixtureMissing):
        fixtures.run_fixture("no_such_fixture")


def test_missing_golden_file(monkeypatch):
    broken = {"ghost": {"args": ["verify"], "expected": "ghost.expected.csv"}}
    monkeypatch.setattr(fixtures, "manifest", lambda: broken)
    with pytest.raises(FixtureMissing):
        fixtures.run_fixture("ghost")


def test_exit_code_mismatch_fails(monkeypatch):
    spec = dict(fixtures.manifest()["toy_w_v"], exit_code=3)
    monkeypatch.setattr(fixtures, "manifest", lambda: {"toy_w_v": spec})
    res = fixtures.run_fixture("toy_w_v")
    assert not res.passed and "exit code 0" in res.message


def test_compare_modes():
    a = "x,y\n1.0,2.0\n"
    assert fixtures._compare(a, a, {"mode": "bitwise"}) == ""
    assert fixtures._compare(a, "x,y\n1.0,2.00\n", {"mode": "bitwise"}) != ""
    assert fixtures._compare(a, "x,y\n1.0,2.00\n", {}) == ""
    assert fixtures._compare(a, "x,y\n1.0,2.0000000001\n", {"eps": 1e-9}) == ""
    assert "column 2" in fixtures._compare(a, "x,y\n1.0,2.1\n", {"eps": 1e-9})
    assert "lines" in fixtures._compare(a, "x,y\n", {})
    assert "cells" in fixtures._compare(a, "x,y\n1.0\n", {})
    assert fixtures._compare("a\nfoo\n", "a\nbar\n", {}) != ""
    assert fixtures._compare("a\n\n", "a\n\n", {}) == ""


def test_verify_fixture_regenerates_bitwise(tmp_path):
    from wshift.cli import main
    spec = fixtures.manifest()["theorem1_verify"]
    outs = []
    for k in range(2):
        out = tmp_path / f"v{k}.csv"
        args = [a.replace("{fixtures}", str(fixtures.fixture_dir())).replace("{out}", str(out)) for a in spec["args"]]
        assert main(args) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == (fixtures.fixture_dir() / spec["expected"]).read_bytes()


def test_bundled_configs_validate():
    from wshift.simbench import bundled_configs, load_run_config, study_configs
    assert sorted(bundled_configs()) == ["beta_consistency", "beta_normality", "cs_misspec", "mar_linear"]
    for name in bundled_configs():
        for cfg in study_configs(load_run_config(name)):
            assert cfg.R >= 1
