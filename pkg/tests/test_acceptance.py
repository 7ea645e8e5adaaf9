"""Acceptance gate: every criterion at its stated scale and tolerance.

Run with `pytest tests/test_acceptance.py -v -s` for the per-criterion
pass/fail lines, or `wring selftest` for the same checks outside pytest.
Shared bundles are cached at module scope so the suite stays inside the
documented desk-scale budget.
"""

import pytest

from wring import selftest


@pytest.fixture(scope="module")
def suite():
    return selftest._Suite()


@pytest.mark.parametrize("cid", sorted(selftest.CRITERIA))
def test_criterion(cid, suite):
    result = selftest.CRITERIA[cid](suite)
    print()
    print(selftest.format_result(result))
    failed = [c for c in result.checks if not c.ok]
    assert result.passed, f"criterion {cid} failed: " + "; ".join(
        f"{c.label}: {c.value:g} not {c.op} {c.limit:g}" for c in failed
    )
