"""Acceptance criteria 1-13, each at its stated tolerance.

Run under pytest for the summary block, or directly with
``python tests/test_acceptance.py`` to print one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import sys
import time

import pytest

from schrodinger_ot import verify
from schrodinger_ot.cli import RunConfig, verify_report
from schrodinger_ot.core import PhysParams

CTX = verify.SuiteContext(PhysParams(), seed=0)


def _worst(checks):
    return ", ".join(f"{c['name']} err={c['error']:.3g} tol={c['tolerance']:.3g}" for c in checks)


def c1():
    return [verify.check_quantile_distance(CTX)]


def c2():
    return verify.check_pythagoras(CTX)


def c3():
    return [verify.check_sinkhorn(CTX)]


def c4():
    return verify.check_assignment(CTX)[:2]


def c5():
    shape_add = [c for c in verify.check_shape_distance(CTX) if c["name"] == "shape_geodesic_additivity"]
    return [verify.check_additivity(CTX)] + shape_add


def c6():
    return verify.check_weak_continuity(CTX)


def c7():
    return verify.check_madelung(CTX)[:2]


def c8():
    return verify.check_metric_derivative(CTX)


def c9():
    from schrodinger_ot.errata import collect_errata

    checks = verify.check_fisher(CTX)
    fisher = [e for e in collect_errata("dynamics") if e["id"] == "fisher-exponent"]
    checks.append({"name": "fisher_erratum_emitted", "error": float(len(fisher) != 1), "tolerance": 0.0,
                   "pass": len(fisher) == 1})
    return checks


def c10():
    return verify.check_spreading(CTX)


def c11():
    return [c for c in verify.check_shape_distance(CTX) if c["name"] != "shape_geodesic_additivity"]


def c12():
    return verify.check_tangent(CTX)


def c13():
    report = verify_report(RunConfig(suite="all"))
    ids = [e["id"] for e in report["errata"]]
    expected = ["distance-width-factor", "phase-gradient-exponent", "fisher-exponent"]
    complete = all({"stated", "computed"} <= set(e) for e in report["errata"])
    divergent = "oracle_integral_0_T" in report["errata"][1]
    ok = ids == expected and complete and divergent
    return [{"name": "errata_report", "error": 0.0 if ok else 1.0, "tolerance": 0.0, "pass": ok},
            {"name": "report_all_pass", "error": float(len(report["failures"])), "tolerance": 0.0,
             "pass": report["passed"]}]


CRITERIA = {
    1: ("distance closed form vs quantile oracle", c1),
    2: ("Pythagoras identity", c2),
    3: ("Sinkhorn agreement", c3),
    4: ("exact assignment optimality", c4),
    5: ("geodesic additivity", c5),
    6: ("weak continuity residual and sensitivity", c6),
    7: ("Madelung residuals", c7),
    8: ("metric derivative and Benamou-Brenier action", c8),
    9: ("Fisher information", c9),
    10: ("spreading law", c10),
    11: ("shape distance and O(3) invariance", c11),
    12: ("tangent quotient", c12),
    13: ("errata report", c13),
}


def evaluate(number: int) -> tuple[bool, str]:
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    checks = fn()
    ok = all(c["pass"] for c in checks)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({time.perf_counter() - start:.1f}s) [{_worst(checks)}]"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_log):
    ok, line = evaluate(number)
    acceptance_log.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
