import numpy as np
import pytest

from maxwellpec.scenario import scenario_from_dict
from maxwellpec.verify import (EstimateReport, verify_hm_estimate,
                               verify_l2_estimate)


def _doc(**data):
    base = {
        "schema": 1,
        "grid": {"nx": 8, "ny": 4, "nz": 9},
        "time": {"horizon": 0.25, "stride": 2},
        "material": {"epsilon": "1", "mu": "1"},
        "data": data,
        "verify": {"order": 1, "gammas": [2.0, 4.0, 8.0]},
    }
    return base


def test_zero_scenario_gives_zero_ratio():
    scn = scenario_from_dict(_doc(u0=["0"] * 6), "zero")
    rep = verify_l2_estimate(scn, levels=1)
    assert rep.passed
    assert all(row["lhs"] == 0.0 and row["ratio"] == 0.0
               for row in rep.table)


def test_forcing_term_decreases_with_gamma():
    scn = scenario_from_dict(
        _doc(f=["sin(2*pi*x3)"] + ["0"] * 5, u0=["0"] * 6), "forced")
    rep = verify_l2_estimate(scn, gammas=(1.0, 2.0, 4.0, 8.0), levels=1)
    f_terms = [row["rhs_terms"]["f_over_gamma_sq"] for row in rep.table]
    assert all(a > b for a, b in zip(f_terms, f_terms[1:]))


def test_order_zero_delegates_to_l2():
    scn = scenario_from_dict(
        _doc(u0=["0", "0", "0", "-cos(2*pi*x3)", "0", "0"]), "sw")
    r_l2 = verify_l2_estimate(scn, gammas=(2.0,), levels=1)
    r_hm0 = verify_hm_estimate(scn, 0, gammas=(2.0,), levels=1)
    assert r_hm0.kind == "l2"
    assert r_hm0.table[0]["ratio"] == pytest.approx(
        r_l2.table[0]["ratio"], rel=1e-12)


def test_order_cap_enforced():
    scn = scenario_from_dict(_doc(u0=["0"] * 6), "zero")
    with pytest.raises(ValueError):
        verify_hm_estimate(scn, 3, levels=1)


def test_report_fails_on_ratio_blowup_under_refinement():
    rep = EstimateReport(kind="l2", order=0, gammas=(2.0,), levels=2)
    rep.table = [
        {"level": 0, "gamma": 2.0, "lhs": 1.0, "rhs_terms": {"x": 1.0},
         "ratio": 1.0},
        {"level": 1, "gamma": 2.0, "lhs": 3.0, "rhs_terms": {"x": 1.0},
         "ratio": 3.0},
    ]
    assert not rep.finalize().passed


def test_report_passes_on_stable_table():
    rep = EstimateReport(kind="l2", order=0, gammas=(2.0, 4.0), levels=2)
    rep.table = [
        {"level": lvl, "gamma": g, "lhs": 1.0, "rhs_terms": {"x": 1.0},
         "ratio": r}
        for lvl, g, r in ((0, 2.0, 1.0), (0, 4.0, 1.3),
                          (1, 2.0, 1.1), (1, 4.0, 1.4))
    ]
    out = rep.finalize()
    assert out.passed and out.spread == pytest.approx(1.4)
