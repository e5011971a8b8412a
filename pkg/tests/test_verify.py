import json

import pytest

from tapersum import verify
from tapersum.errors import DomainError
from tapersum.stats import THRESHOLDS


class TestCases:
    def test_hurst_exponents(self):
        i, ii, iii = verify.T1_CASES
        assert i.H == pytest.approx(0.8)
        assert ii.H == pytest.approx(0.625)
        assert iii.H == pytest.approx(0.2875)

    def test_stable_cases_self_similarity(self):
        assert [c.H for c in verify.T2_CASES] == pytest.approx([1 / 1.5 + 1 - 0.8, 1 / 1.5])

    def test_regime_grid_size(self):
        assert len(verify.regime_grid()) == 20 * 25 * 20 * 2


@pytest.fixture(scope="module")
def moments():
    return verify.run_suite("moments")


class TestSuites:
    def test_moments_suite_passes(self, moments):
        assert moments.passed
        assert moments.seed == verify.SEED

    def test_json_document(self, moments):
        doc = json.loads(json.dumps(moments.to_dict()))
        assert doc["suite"] == "moments" and doc["passed"]
        assert doc["thresholds"] == THRESHOLDS.to_dict()
        assert all({"name", "value", "threshold", "passed"} <= set(r) for r in doc["reports"])

    def test_fast_mode_widens(self):
        res = verify.run_suite("moments", fast=True)
        assert res.thresholds["cf_tol"] == pytest.approx(THRESHOLDS.cf_tol * verify.FAST_WIDEN)
        assert all(r.detail.get("fast") for r in res.reports if "fast" in r.detail)

    def test_deterministic(self):
        a = verify.check_sampler()
        b = verify.check_sampler()
        assert [r.value for r in a] == [r.value for r in b]

    def test_unknown_suite(self):
        with pytest.raises(DomainError):
            verify.run_suite("nope")

    def test_every_criterion_has_a_suite(self):
        in_suites = {fn for fns in verify.SUITES.values() for fn in fns}
        assert set(verify.CRITERIA.values()) <= in_suites
