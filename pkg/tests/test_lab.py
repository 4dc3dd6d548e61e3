import dataclasses
import json

import numpy as np
import pytest

from rank1lab import lab
from rank1lab.ambient import make_space
from rank1lab.lab import (CaseConfig, MANIFEST, cfg, complete_shape, default_registry, margin_profile, run_campaign,
                          run_case, select, shape_sampler, threshold_table)
from rank1lab.shape import omega_coefficient


@pytest.fixture(scope="module")
def registry():
    return default_registry()


def test_registry_matches_manifest(registry):
    assert tuple(registry) == MANIFEST
    assert len(set(MANIFEST)) == len(MANIFEST)
    for case in registry.values():
        assert case.anchor and case.configs


def test_select(registry):
    assert list(select(registry, "ll-bound")) == ["ll-bound"]
    assert set(select(registry, "reaction-*,ll-*")) == {k for k in MANIFEST if k.startswith(("reaction-", "ll-"))}
    assert select(registry, None) == registry
    assert select(registry, "nothing*") == {}


def test_campaign_errors(registry):
    with pytest.raises(ValueError, match="empty"):
        run_campaign({}, 1, 10)
    with pytest.raises(ValueError, match="budget"):
        run_campaign(select(registry, "ll-bound"), 1, 0)


def test_deterministic(registry):
    sub = select(registry, "ll-bound,angle-product,gradient-eta,z-bound-p")
    a = run_campaign(sub, 7, 700).to_json()
    b = run_campaign(sub, 7, 700).to_json()
    assert a == b
    c = run_campaign(sub, 8, 700).to_json()
    assert a != c


def test_chunks_independent_of_budget(registry):
    case = registry["ll-bound"]
    small = run_case(case, 3, lab.CHUNK)
    big = run_case(dataclasses.replace(case, configs=case.configs[:1]), 3, 4 * lab.CHUNK)
    # chunk 0 always uses the first config, so both runs share it
    assert small.per_config[case.configs[0].label]["worst_margin"] >= big.worst_margin


def test_infeasible_case_skipped(registry):
    case = dataclasses.replace(registry["type2-relations"], configs=(cfg("C", 1, 3, 2),))
    r = run_case(case, 1, 100)
    assert r.status == "skipped" and "k <= m" in r.reason.replace("k<=m", "k <= m")


def test_mislabeled_ll_reports_precondition(registry):
    case = dataclasses.replace(registry["ll-bound"], sampler=shape_sampler("free"), complete=complete_shape("free"))
    r = run_case(case, 1, 512)
    assert r.status == "precondition violated"
    assert r.n_precondition_failed > 0


def test_failure_carries_shrunk_witness(registry):
    r = run_campaign(select(registry, "z-bound-p"), lab.DEFAULT_SEED, 4096)
    res = r.cases["z-bound-p"]
    assert res.status == "fail" and res.witness is not None
    w = res.witness
    assert w["shrunk_margin"] <= 0 and w["shrink_steps"] >= 0
    assert np.asarray(w["shrunk_h"]).ndim == 3
    rec = r.violation_records()[0]
    assert set(rec) >= {"lemma", "seed", "m", "k", "family", "margin"}
    json.dumps(lab._jsonable(rec))


def test_witness_reproduces_margin(registry):
    case = registry["z-bound-p"]
    res = run_case(case, 5, 4096)
    assert res.witness["margin"] == pytest.approx(res.worst_margin, rel=1e-12, abs=1e-15)


def test_angle_product_passes_small(registry):
    r = run_case(registry["angle-product"], 11, 2048)
    assert r.status == "pass" and r.worst_margin >= -1e-9


def test_margin_normalization():
    case = lab.LemmaCase("x", "x", "x", (cfg("C", 1, 2, 2),), None, None, homogeneous=True)
    m = lab._margins(case, np.array([1.0, 2.0, np.nan]), np.array([3.0, 2.0, 1.0]))
    assert m[0] == pytest.approx(0.5) and m[1] == 0.0 and m[2] == -np.inf
    case = dataclasses.replace(case, homogeneous=False)
    m = lab._margins(case, np.array([0.1, 10.0]), np.array([0.3, 30.0]))
    assert m == pytest.approx([0.2, 0.5])


def test_omega_coefficient_profile():
    rows = margin_profile("omega-coefficient", [{"d": 2, "m": m} for m in range(3, 14)])
    signs = [r["margin"] >= 0 for r in rows]
    assert signs.index(True) == 8 - 3 and all(signs[5:])
    assert rows[4]["margin"] < 0          # d = 2, m = 7
    tt = threshold_table()
    assert tt[2]["first_nonnegative"] == 8 and tt[4]["first_nonnegative"] == 11
    assert tt[8]["first_nonnegative"] == 2      # m = 1 is excluded (singular)
    assert tt[4]["isolated_nonnegative"] == [2] and tt[2]["isolated_nonnegative"] == []


def test_alpha_k2_negative_octonionic():
    rows = margin_profile("alpha-k2", [{"d": 8, "m": m} for m in range(2, 17)])
    assert all(r["margin"] < 0 for r in rows)


def test_preservation_coefficient_profile():
    rows = margin_profile("preservation-gradient-coefficient", [{"d": 2, "m": m, "eps": 0.0} for m in range(3, 12)])
    first = next(r["m"] for r in rows if r["margin"] >= 0)
    assert first == 5
    assert all(r["margin"] >= 0 for r in rows if r["m"] >= first)


def test_case_profile(registry):
    rows = margin_profile(registry["ll-bound"], [cfg("C", 1, 3, 5), cfg("C", 1, 4, 7)], budget=256)
    assert [r["m"] for r in rows] == [5, 7] and all(r["status"] == "pass" for r in rows)
    with pytest.raises(KeyError):
        margin_profile("nope", [])


def test_report_json_roundtrip(registry):
    rep = run_campaign(select(registry, "ll-bound"), 2, 300)
    data = json.loads(rep.to_json())
    assert data["cases"]["ll-bound"]["n_samples"] == 300
    assert "runtime" not in data["cases"]["ll-bound"]
    assert json.loads(json.dumps(data)) == data
