"""The ten acceptance criteria at their stated sample sizes and tolerances."""
import json

import pytest

from fragkin.acceptance import CRITERIA, SEED, run_criterion
from fragkin.solution import report_json


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, record_criterion):
    result = run_criterion(number, SEED)
    record_criterion(result)
    assert result.passed, report_json(result.details)


def test_result_line_format():
    from fragkin.acceptance import CriterionResult
    r = CriterionResult(3, "demo", True, {}, 1.25)
    assert r.line() == "criterion  3 [PASS] demo (1.2s)"
    assert json.loads(report_json(r.to_dict()))["passed"] is True
