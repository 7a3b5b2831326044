import json

import pytest

from wgroupoid import harness as H
from wgroupoid.errors import ConfigError, UnknownCheck, UnknownGenerator

SMALL = {"algebras": ["M2"], "seeds": [0], "suites": ["involution"]}


def test_empty_suite_selection():
    with pytest.raises(ConfigError):
        H.SuiteConfig(suites=())
    with pytest.raises(ConfigError):
        H.SuiteConfig.from_dict({"suites": []})


@pytest.mark.parametrize("bad", [{"algebras": []}, {"seeds": []}, {"suites": ["nope"]},
                                 {"samples": {"algebra": 0}}, {"tol_scale": 0}, {"colour": 1},
                                 {"checks": ["no.such.check"]}])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        H.SuiteConfig.from_dict(bad)


def test_explain():
    text = H.explain("poisson.check_J1_poisson")
    assert "Poisson map" in text and "{F o J1, G o J1}" in text
    assert "core" in H.explain("vb.core_compute.pair")
    with pytest.raises(UnknownCheck):
        H.explain("poisson.nope")


def test_check_ids_are_module_qualified():
    for cid, c in H.REGISTRY.items():
        assert cid.split(".")[0] == c.suite


def test_coverage_has_no_orphan_anchor():
    cov = H.coverage()
    assert set(cov) == set(H.ANCHORS)
    assert all(cov.values()), [a for a, ids in cov.items() if not ids]


@pytest.mark.parametrize("gen", sorted(H.GENERATORS))
def test_fixture_bytes_and_round_trip(gen):
    a, b = H.fixture(gen, 3), H.fixture(gen, 3)
    assert a == b
    doc = H.load_fixture(a)
    again = json.loads(a)
    for sec in ("elements", "projections", "frames"):
        for k, x in doc[sec].items():
            assert H.encode_element(x) == again[sec][k]
    assert json.loads(a)["schema"] == "1"


def test_t_family_fixture():
    doc = H.load_fixture(H.fixture("t-family"))
    for t in (0.1, 1.0, 10.0):
        yp = doc["elements"][f"y_perp[t={t}]"]
        assert yp.blocks[0][0, 1] == pytest.approx(-t, abs=1e-12)
        assert abs(yp.blocks[0]).sum() == pytest.approx(t, abs=1e-12)
        assert doc["elements"][f"y_p[t={t}]"].blocks[0][1, 0] == t
    assert doc["projections"]["p"].rank_vector == (1,)


def test_chart_fixture_records_frames():
    doc = H.load_fixture(H.fixture("chart", 1))
    assert {"eta_pp0", "z0"} <= set(doc["frames"])


def test_unknown_generator():
    with pytest.raises(UnknownGenerator):
        H.fixture("nope")


def test_run_is_deterministic():
    cfg = H.SuiteConfig.from_dict(SMALL)
    a, b = H.run(cfg), H.run(cfg)
    assert a.passed
    assert a.to_dict(with_times=False) == b.to_dict(with_times=False)


def test_report_fail_iff_residual_exceeds_tolerance():
    rep = H.run(H.SuiteConfig.from_dict(dict(SMALL, suites=["algebra"])))
    for r in rep.results:
        if not r.error and r.skipped * 2 <= r.samples + r.skipped:
            assert r.passed == (r.residual <= r.tolerance)


def test_tolerance_override_can_fail_a_check():
    cfg = H.SuiteConfig.from_dict(dict(SMALL, checks=["involution.perp_transition.oracle"],
                                       tolerances={"involution.perp_transition.oracle": 0.0}))
    rep = H.run(cfg)
    r = rep.by_id("involution.perp_transition.oracle")
    assert r.residual > 0 and not r.passed


def test_negative_suite_fails():
    rep = H.run(H.SuiteConfig.from_dict({"algebras": ["M2"], "seeds": [0], "suites": ["negative"]}))
    assert rep.results and all(r.expected_fail and not r.passed for r in rep.results)
    assert H.negative_controls_ok(rep)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(dict(SMALL, algebras=["C+M2"])))
    out = tmp_path / "r.json"
    assert H.main(["run", "--config", str(cfg), "--json", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["schema"] == "1" and report["passed"]
    assert H.main(["run", "--config", str(cfg), "--tol-scale", "1e-30"]) == 1
    assert H.main(["run", "--suite", ""]) == 2
    assert H.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert H.main(["explain", "nope"]) == 2
    assert H.main(["explain", "vb.core_compute.pair"]) == 0
    assert H.main(["list", "--suite", "involution"]) == 0
    assert "involution.perp_transition.t_family" in capsys.readouterr().out
    fx = tmp_path / "f.json"
    assert H.main(["fixture", "t-family", "--seed", "0", "--json", str(fx)]) == 0
    assert fx.read_text() == H.fixture("t-family", 0)


def test_block_size_algebras_survive_cli_round_trip(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"algebras": [[2, 3]], "seeds": [0], "suites": ["involution"],
                               "samples": {"involution": 2}}))
    assert H.main(["run", "--config", str(cfg)]) == 0
    assert H.SuiteConfig.from_dict({"algebras": [[1, 2]], "suites": ["involution"]}).to_dict()["algebras"] == ["C+M2"]
    with pytest.raises(ConfigError):
        H.SuiteConfig.from_dict({"algebras": ["X7"]})
