import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from urllc.dependability import (
    MdoProblem, StructureSpec, TwoStateMarkov, from_db, gilbert_elliot_rates, mdo_margin,
    mdo_probability_bound, outage_only_margin, relay_bridge, reliability_at, steady_quantities,
    structure_availability, to_db,
)
from urllc.errors import BoundInvalidError, DomainError, ResourceError

import oracles


def test_gilbert_elliot_unit_ratio():
    m = gilbert_elliot_rates(1.0, 1.0, 1.0)
    assert m.failure_rate == pytest.approx(2.50663, abs=1e-5)
    # direct substitution: sqrt(2*pi)/(e - 1)
    assert m.repair_rate == pytest.approx(1.458799, abs=1e-6)


def test_gilbert_elliot_half_unavailability():
    m = gilbert_elliot_rates(math.log(2), 1.0, 3.0)
    assert m.failure_rate / (m.failure_rate + m.repair_rate) == pytest.approx(0.5, rel=1e-12)


def test_gilbert_elliot_reference_operating_point():
    m = gilbert_elliot_rates(2.818e-4, 1.0, 93.33)
    assert m.failure_rate == pytest.approx(3.927, rel=1e-3)
    assert 1 / m.repair_rate == pytest.approx(7.18e-5, rel=1e-2)
    assert mdo_probability_bound(m, 2e-4, 93.33, 1 / 2.818e-4) == pytest.approx(1.0e-4, rel=0.05)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, -1)])
def test_gilbert_elliot_rejects_nonpositive(args):
    with pytest.raises(DomainError):
        gilbert_elliot_rates(*args)


@settings(max_examples=200, deadline=None)
@given(st.floats(-8, 2), st.floats(-2, 3))
def test_gilbert_elliot_unavailability_matches_outage(log_ratio, log_fd):
    x = 10.0**log_ratio
    m = gilbert_elliot_rates(x, 1.0, 10.0**log_fd)
    unav = m.failure_rate / (m.failure_rate + m.repair_rate)
    assert unav == pytest.approx(-math.expm1(-x), rel=1e-12)


def test_steady_quantities():
    s = steady_quantities(TwoStateMarkov(1.0, 9.0))
    assert s.availability == pytest.approx(0.9)
    assert s.mttf == s.mut == 1.0
    assert s.mdt == pytest.approx(1 / 9)
    assert steady_quantities(TwoStateMarkov(2.0, 2.0)).availability == 0.5


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_steady_identities(lam, mu):
    s = steady_quantities(TwoStateMarkov(lam, mu))
    assert s.availability == pytest.approx(s.mut / (s.mut + s.mdt), rel=1e-12)
    assert lam / (lam + mu) + mu / (lam + mu) == pytest.approx(1.0, abs=1e-15)


def test_transition_matrix_rows_sum_to_zero():
    M = TwoStateMarkov(0.3, 2.0).transition_matrix
    assert np.allclose(M.sum(axis=1), 0)


def test_markov_rejects_nonpositive_rates():
    with pytest.raises(DomainError):
        TwoStateMarkov(0.0, 1.0)


def test_reliability():
    m = TwoStateMarkov(1.0, 5.0)
    assert reliability_at(m, 0) == 1.0
    assert reliability_at(m, 1.0) == pytest.approx(0.367879, abs=1e-6)
    with pytest.raises(DomainError):
        reliability_at(m, -1)


def test_reliability_integrates_to_mttf():
    m = TwoStateMarkov(0.37, 5.0)
    val, _ = integrate.quad(lambda t: reliability_at(m, t), 0, np.inf)
    assert val == pytest.approx(steady_quantities(m).mttf, rel=1e-6)


def test_structure_small_cases():
    assert structure_availability(StructureSpec.parallel(2), [0.9, 0.9]) == pytest.approx(0.99)
    assert structure_availability(StructureSpec.k_out_of_n(2, 3), [0.9] * 3) == pytest.approx(0.972)
    assert structure_availability(StructureSpec.series(3), [0.9, 0.8, 0.5]) == pytest.approx(0.36)


def test_relay_bridge_availability():
    assert structure_availability(relay_bridge(), [0.9] * 5) == pytest.approx(0.97848, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_relay_bridge_matches_pivotal_decomposition(p):
    assert structure_availability(relay_bridge(), p) == pytest.approx(
        oracles.bridge_availability(p), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.data())
def test_closed_forms_match_enumeration(n, data):
    p = data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    k = data.draw(st.integers(1, n))
    cases = [
        (StructureSpec.series(n), lambda x: all(x)),
        (StructureSpec.parallel(n), lambda x: any(x)),
        (StructureSpec.k_out_of_n(k, n), lambda x: sum(x) >= k),
    ]
    for spec, phi in cases:
        explicit = StructureSpec.explicit(n, phi)
        assert structure_availability(spec, p) == pytest.approx(
            structure_availability(explicit, p), abs=1e-12)
        if n <= 8:
            assert structure_availability(spec, p) == pytest.approx(
                oracles.brute_structure(phi, p), abs=1e-12)


def test_enumeration_up_to_twenty_items():
    n = 20
    p = np.linspace(0.5, 0.99, n)
    spec = StructureSpec("explicit", n, truth_table=StructureSpec.k_out_of_n(15, n).table())
    binom = structure_availability(StructureSpec.k_out_of_n(15, n), p)
    assert structure_availability(spec, p) == pytest.approx(binom, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 10), st.floats(0.01, 0.99), st.data())
def test_series_kofn_parallel_ordering(n, p, data):
    k = data.draw(st.integers(1, n))
    ps = [p] * n
    s = structure_availability(StructureSpec.series(n), ps)
    m = structure_availability(StructureSpec.k_out_of_n(k, n), ps)
    par = structure_availability(StructureSpec.parallel(n), ps)
    assert s <= m + 1e-12 and m <= par + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=5), st.integers(0, 4), st.floats(0, 1))
def test_structure_monotone_in_item_availability(p, i, bump):
    q = list(p)
    q[i] = max(q[i], bump)
    assert structure_availability(relay_bridge(), q) >= structure_availability(relay_bridge(), p) - 1e-12


def test_structure_rejects_bad_input():
    with pytest.raises(DomainError):
        structure_availability(StructureSpec.series(2), [0.5, 1.5])
    with pytest.raises(DomainError):
        structure_availability(StructureSpec.series(2), [0.5])
    with pytest.raises(DomainError):
        StructureSpec.explicit(2, lambda x: x[0] and not x[1])
    with pytest.raises(DomainError):
        StructureSpec.k_out_of_n(4, 3)


def test_explicit_enumeration_limit():
    spec = StructureSpec("explicit", 26, truth_table=lambda x: all(x))
    with pytest.raises(ResourceError):
        structure_availability(spec, [0.9] * 26)


def test_mdo_bound_limits():
    big = [mdo_probability_bound(TwoStateMarkov(1.0, 1e5), 2e-4, 93.33, F) for F in (1e2, 1e3, 1e4)]
    assert big[0] > big[1] > big[2] > 0


@pytest.mark.parametrize("F", [100.0, 1e3, 1e5])
def test_mdo_bound_taylor_form(F):
    m = TwoStateMarkov(1.0, 1e5)
    taylor = 1 / math.sqrt(2 * math.pi * F**3 * (2e-4 * 93.33) ** 2)
    assert mdo_probability_bound(m, 2e-4, 93.33, F) == pytest.approx(taylor, rel=0.01)


def test_mdo_bound_requires_short_downtime():
    with pytest.raises(BoundInvalidError):
        mdo_probability_bound(TwoStateMarkov(1.0, 1.0), 2e-4, 93.33, 100.0)


def test_mdo_margin_reference_values():
    F4, _ = mdo_margin(MdoProblem(1e-4, 2e-4, 93.33))
    F7, _ = mdo_margin(MdoProblem(1e-7, 2e-4, 93.33))
    assert to_db(F4) == pytest.approx(35.5, abs=0.2)
    assert to_db(F7) == pytest.approx(55.5, abs=0.2)


@pytest.mark.parametrize("xi", np.logspace(-7, -3, 9))
def test_mdo_margin_root_and_closed_form(xi):
    root, closed = mdo_margin(MdoProblem(float(xi), 2e-4, 93.33))
    assert root == pytest.approx(oracles.mdo_root(float(xi), 2e-4 * 93.33), rel=1e-8)
    assert abs(root - closed) / root < 0.01


def test_mdo_margin_decreasing_and_below_outage_only():
    xis = np.logspace(-7, -3.5, 8)
    roots = [mdo_margin(MdoProblem(float(x), 2e-4, 93.33))[0] for x in xis]
    assert all(a > b for a, b in zip(roots, roots[1:]))
    assert all(r <= outage_only_margin(float(x)) for r, x in zip(roots, xis))


def test_mdo_problem_validity_limit():
    with pytest.raises(BoundInvalidError):
        MdoProblem(2e-3, 2e-4, 93.33)
    with pytest.raises(DomainError):
        MdoProblem(1e-4, 0.0, 93.33)


def test_outage_only_margin():
    assert to_db(outage_only_margin(1e-4)) == pytest.approx(40, abs=0.1)
    assert to_db(outage_only_margin(1e-7)) == pytest.approx(70, abs=0.1)
    assert outage_only_margin(1 - math.exp(-1)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        outage_only_margin(1.0)


def test_db_round_trip():
    assert from_db(to_db(123.4)) == pytest.approx(123.4)
