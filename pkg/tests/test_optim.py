import numpy as np
import pytest
from scipy.optimize import minimize, rosen, rosen_der

from gplvm_density.exceptions import InvalidInputError, NumericalError
from gplvm_density.optim import cg_minimize, wolfe_line_search


@pytest.mark.parametrize("seed", range(10))
def test_quadratic_converges_in_n_plus_two(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((5, 5))
    Q = B @ B.T + 0.5 * np.eye(5)
    x, tr = cg_minimize(lambda x: (0.5 * x @ Q @ x, Q @ x), rng.standard_normal(5), max_steps=7, gtol=1e-8, tol=0)
    assert np.linalg.norm(Q @ x) <= 1e-8
    assert tr.n_steps <= 7


def test_rosenbrock():
    x, tr = cg_minimize(lambda x: (rosen(x), rosen_der(x)), [-1.2, 1.0], max_steps=600, tol=0, gtol=1e-12)
    assert rosen(x) <= 1e-6
    # the reference optimizer lands on the same minimum
    ref = minimize(rosen, [-1.2, 1.0], jac=rosen_der, method="CG", options={"gtol": 1e-10})
    np.testing.assert_allclose(x, ref.x, atol=1e-3)


def test_stationary_start_returns_x0():
    x0 = np.array([0.0, 0.0])
    x, tr = cg_minimize(lambda x: (float(x @ x), 2 * x), x0)
    np.testing.assert_array_equal(x, x0)
    assert tr.n_steps <= 1 and tr.status == "converged"


def test_values_never_increase():
    rng = np.random.default_rng(0)
    _, tr = cg_minimize(lambda x: (rosen(x), rosen_der(x)), rng.standard_normal(6), max_steps=200)
    assert np.all(np.diff(tr.values) <= 0)


def test_zero_budget():
    x, tr = cg_minimize(lambda x: (float(x @ x), 2 * x), [1.0, 2.0], max_steps=0)
    np.testing.assert_array_equal(x, [1.0, 2.0])
    assert tr.n_steps == 0


def test_numerical_errors_are_treated_as_overshoot():
    def fun(x):
        if x[0] > 0.5:
            raise NumericalError("outside the domain")
        return float((x[0] - 0.4) ** 2), np.array([2 * (x[0] - 0.4)])

    x, tr = cg_minimize(fun, [-3.0], max_steps=50)
    assert x[0] == pytest.approx(0.4, abs=1e-6)


def test_non_finite_start_rejected():
    with pytest.raises(InvalidInputError):
        cg_minimize(lambda x: (np.inf, x), [1.0])


def test_wolfe_conditions_hold():
    f = lambda a: ((a - 2.0) ** 2, 2 * (a - 2.0), None)  # noqa: E731
    f0, s0 = 4.0, -4.0
    a, fa, _, _, ok = wolfe_line_search(f, f0, s0, 0.1, c1=1e-4, c2=0.1)
    assert ok
    assert fa <= f0 + 1e-4 * a * s0
    assert abs(2 * (a - 2.0)) <= 0.1 * abs(s0)
