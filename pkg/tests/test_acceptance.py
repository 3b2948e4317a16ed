"""Acceptance criteria 1-17, each at its stated tolerance.

One line per criterion is printed and collected into the terminal summary.
Criteria 11-13 and 16 share lattice passes (N = 512 and N = 1024) through a
module-level context, so running the whole module costs roughly one pass of
each size.
"""

import pytest

from gffx import acceptance
from gffx.reports import FAIL

from .conftest import ACCEPTANCE_LINES

CTX = acceptance.AcceptanceContext(seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    rep = acceptance.run_criterion(number, CTX)
    status = "PASS" if rep.verdict != FAIL else "FAIL"
    line = f"criterion {number:2d} {status}: {rep.line()}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert rep.verdict != FAIL, rep.details
