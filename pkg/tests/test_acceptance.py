"""Full acceptance sweep: every criterion at its stated tolerance.

Each criterion prints one live PASS/FAIL line with its detail string; the
test fails if the criterion reports failure or overruns its time budget.
"""

import pytest

from lbfilm import acceptance


@pytest.mark.parametrize("criterion", acceptance.CRITERIA,
                         ids=lambda fn: fn.__name__)
def test_criterion(criterion, capsys):
    result = criterion()
    with capsys.disabled():
        verdict = "PASS" if result.passed else "FAIL"
        print(f"\n{result.name} {verdict} - {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
