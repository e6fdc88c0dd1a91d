"""Acceptance criteria 1-10 at their stated tolerances.

The whole suite runs once per session (criterion 10 reruns criteria 1-9 and
compares CSV bytes), then each criterion is reported as its own test with a
one-line PASS/FAIL summary on the terminal.
"""
import pytest

from truncdefect.acceptance import CRITERIA, run_acceptance
from truncdefect.harness import ExperimentConfig, _short


@pytest.fixture(scope="session")
def acceptance_records(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    cfg = ExperimentConfig.from_dict({"schema_version": 1, "experiment": "Acceptance"},
                                     output_dir=out)
    return {r.criterion: r for r in run_acceptance(cfg, jobs=1)}


@pytest.mark.parametrize("n", [pytest.param(n, marks=pytest.mark.slow) if n >= 9 else n
                               for n in sorted(CRITERIA)])
def test_criterion(acceptance_records, capsys, n):
    rec = acceptance_records[n]
    name, _, tol, budget = CRITERIA[n]
    shown = ", ".join(f"{k}={_short(v)}" for k, v in rec.measured.items())
    with capsys.disabled():
        print(f"\n[{rec.status}] criterion {n} ({name}, tol {tol:g}): {shown} "
              f"[{rec.seconds:.1f} s of {budget:g} s]" if budget else
              f"\n[{rec.status}] criterion {n} ({name}): {shown} [{rec.seconds:.1f} s]")
    assert rec.status == "PASS", rec.notes
