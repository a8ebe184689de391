import math

import pytest

from schrodinger_ot import analytic, errata
from schrodinger_ot.core import PhysParams

U = PhysParams()


def test_three_errata_with_stated_and_computed_values():
    entries = errata.collect_errata("all")
    assert [e["id"] for e in entries] == ["distance-width-factor", "phase-gradient-exponent", "fisher-exponent"]
    for e in entries:
        assert {"stated", "computed", "oracle", "stated_error", "computed_error"} <= set(e)
        assert e["computed_error"] <= 1e-6
        assert e["stated_error"] > 1e3 * max(e["computed_error"], 1e-12)


def test_suite_partition():
    assert len(errata.collect_errata("distances")) == 1
    assert len(errata.collect_errata("dynamics")) == 2
    assert errata.collect_errata("madelung") == []
    assert errata.collect_errata("shape") == []


def test_stated_forms_coincide_with_derivation_only_in_special_cases():
    assert errata.stated_w2(U, 0, 1) == pytest.approx(analytic.w2_closed_form(U, 0, 1))
    assert errata.stated_fisher(U, 0) == pytest.approx(analytic.fisher_information(U, 0))
    assert errata.stated_fisher(U, 1) != pytest.approx(analytic.fisher_information(U, 1))


def test_time_integral_of_phase_gradient_grows_without_bound():
    e = errata.phase_gradient_erratum()
    partial = list(e["oracle_integral_0_T"].values())
    assert partial[0] < partial[1] < partial[2]
    assert partial[-1] > 100 * e["stated_integral_0_inf"]
    for key, value in e["oracle_integral_0_T"].items():
        assert value == pytest.approx(e["computed_integral_0_T"][key], rel=1e-8)


def test_phase_gradient_growth_rate():
    p = errata.PROBE_PARAMS
    # speed tends to sqrt(1.5) * hbar / (m l), so the integral is asymptotically linear in T
    assert analytic.metric_derivative(p, 1e6) == pytest.approx(math.sqrt(1.5) * p.hbar / (p.mass * p.width), rel=1e-9)
