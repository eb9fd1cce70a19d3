"""Desk acceptance suite: every criterion at its stated tolerance.

The suite runs once per session; each criterion prints one PASS/FAIL line
and gets its own test so a failure is reported by name.
"""

import sys

import pytest

from ngrc_readout.acceptance import CRITERIA, N_TRIALS, format_line, run_criterion

IDS = [c.id for c in CRITERIA]


@pytest.fixture(scope="session")
def outcomes(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")
    results = {}
    with capman.global_and_fixture_disabled():
        print("\nacceptance criteria:", file=sys.stdout, flush=True)
        for c in CRITERIA:
            out = run_criterion(c, N_TRIALS)
            results[c.id] = out
            print(f"  {format_line(c, out)}  [{out.seconds:.1f} s]", file=sys.stdout, flush=True)
    return results


@pytest.mark.parametrize("cid", IDS)
def test_criterion(outcomes, cid):
    out = outcomes[cid]
    assert out.passed, f"{cid}: {out.detail}"
