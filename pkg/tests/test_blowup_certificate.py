import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from dampwave.blowup_certificate import (EpsilonTooLarge, closed_form_ab, functional_lifespan,
                                         functional_theory_exponent, iterate_bounds,
                                         j_functional, j_threshold_tau, lower_bound_E,
                                         pnu1_certificate_tau, calibrate_E)
from dampwave.errors import RegimeError, UsageError
from dampwave.exponents import ProblemParams, gamma_s, solve_b


def test_recursion_closed_form():
    pr = ProblemParams(2.0, 0.0, 3.0)
    st_ = iterate_bounds(pr, 0.1, 2.0, 3)
    assert list(st_.a) == [1, 4, 10, 22]
    assert list(st_.b) == [3, 7, 15, 31]
    a, b = closed_form_ab(pr, np.arange(4))
    assert np.allclose(a, st_.a) and np.allclose(b, st_.b)
    with pytest.raises(UsageError):
        iterate_bounds(pr, 0.1, 2.0, 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.2, 4.0), st.floats(0.0, 4.0), st.floats(0.1, 4.0), st.floats(1e-3, 1.0),
       st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_logC_invariant(p, mu, kappa, eps, C, M):
    pr = ProblemParams(p, mu, kappa)
    E = lower_bound_E(pr, C, M)
    s = iterate_bounds(pr, eps, 2.0, 25, C, M)
    n = np.arange(26)
    bound = p ** n * math.log(eps * E)
    assert np.all(s.logC >= bound - 1e-9 * np.abs(bound))


def test_j_threshold():
    pr = ProblemParams(2.0, 0.0, 0.5)
    taus = [j_threshold_tau(pr, e) for e in (0.1, 0.01)]
    slope = math.log(taus[1] / taus[0]) / math.log(0.1)
    assert abs(slope + 2 / 3) < 1e-12
    for e, tau in zip((0.1, 0.01), taus):
        assert j_functional(pr, e, 4.8685, 1.5, tau, tau / 2) >= 2 * (1 - 1e-12)
    with pytest.raises(RegimeError):
        j_threshold_tau(ProblemParams(2.0, 0.0, 3.0), 0.1)
    with pytest.raises(EpsilonTooLarge):
        j_threshold_tau(pr, 0.9)
    # calibration inverts the threshold
    E = calibrate_E(pr, 0.1, 20.0)
    assert abs(j_threshold_tau(pr, 0.1, E) - 20.0) < 1e-9


def test_pnu1_certificate():
    pr = ProblemParams(2.0, 0.0, 1.5)
    tau = pnu1_certificate_tau(pr, 0.1, 0.5)
    gs = gamma_s(2.0, 3.0)
    ref = 16 * 0.5 ** (-2 * (2 - 1) / gs) * solve_b(0.1, 2.0, 0.0)
    assert abs(tau - ref) < 1e-9 * ref
    with pytest.raises(RegimeError):
        pnu1_certificate_tau(ProblemParams(2.0, 0.0, 3.0), 0.1)


def _ode_lifespan(eps, p, theta, alpha=1.0, beta=0.0, cap=1e12):
    floor, c2 = eps ** alpha, eps ** beta

    def rhs(y, z):
        f = max(floor, c2 * z[0] / y)
        return [z[1], f ** p * y ** (-theta)]

    ev = lambda y, z: c2 * z[0] / y - cap
    ev.terminal = True
    sol = solve_ivp(rhs, (1.0, 1e8), [0.0, 0.0], events=ev, rtol=1e-11, atol=1e-14,
                    method="DOP853")
    return sol.t_events[0][0]


@pytest.mark.parametrize("eps,theta", [(0.1, 0.0), (0.05, 0.0), (0.2, 0.5)])
def test_functional_lifespan_ode_oracle(eps, theta):
    got = functional_lifespan(None, eps, C1=1.0, C2=1.0, theta=theta, p=2.0)
    ref = _ode_lifespan(eps, 2.0, theta)
    assert abs(got - ref) < 0.01 * ref


def test_functional_edge_cases():
    assert functional_lifespan(None, 0.1, C2=0.0, theta=0.0, p=2.0) == math.inf
    with pytest.raises(RegimeError):
        functional_lifespan(None, 0.1, theta=1.5, p=2.0)
    assert functional_theory_exponent(2.0, 1.0, 0.0, 1) == -1.0
    assert functional_theory_exponent(2.0, 1.0, 0.0, 0.5) == -2.0
