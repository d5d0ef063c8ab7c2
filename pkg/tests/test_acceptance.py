"""The twelve end-to-end acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.
"""

import pytest

from conftest import ACCEPTANCE_LINES

from agepde import acceptance


@pytest.mark.parametrize("number,title", [(n, t) for n, t, _, _ in acceptance.CRITERIA],
                         ids=[f"criterion_{n:02d}" for n, *_ in acceptance.CRITERIA])
def test_criterion(number, title, alpha_star):
    assert acceptance.alpha_star() == pytest.approx(alpha_star, abs=1e-14)
    outcome = acceptance.run_one(number)
    line = f"criterion {number:>2} {title:<38} {'PASS' if outcome.passed else 'FAIL'}  ({outcome.seconds:.1f} s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert outcome.passed, outcome.detail
