import numpy as np
import pytest

from paintword.adam import grad_init, grad_step
from paintword.errors import InvalidConfig, InvalidGradient


def test_zero_gradient_leaves_params_unchanged():
    st = grad_init(3, 0.1)
    st, params = grad_step(st, np.array([1.0, -2.0, 0.5]), np.zeros(3))
    assert np.array_equal(params, np.array([1.0, -2.0, 0.5]))


def test_two_step_hand_computed_oracle():
    # x0 = 1, gradient 0.5 at both steps, alpha = 0.1, default betas
    alpha, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    g = 0.5
    m1 = (1 - b1) * g
    v1 = (1 - b2) * g * g
    x1 = 1.0 - alpha * (m1 / (1 - b1)) / (np.sqrt(v1 / (1 - b2)) + eps)
    m2 = b1 * m1 + (1 - b1) * g
    v2 = b2 * v1 + (1 - b2) * g * g
    x2 = x1 - alpha * (m2 / (1 - b1 ** 2)) / (np.sqrt(v2 / (1 - b2 ** 2)) + eps)

    st = grad_init(1, alpha)
    st, p = grad_step(st, np.array([1.0]), np.array([g]))
    assert p[0] == pytest.approx(x1, abs=1e-15)
    st, p = grad_step(st, p, np.array([g]))
    assert p[0] == pytest.approx(x2, abs=1e-15)
    assert st.step == 2


def test_quadratic_descent():
    # direct run: monotone until the momentum overshoot near the optimum
    # (around step 11 for this configuration), and far below the start
    # everywhere in the first 50 steps
    st = grad_init(1, 0.1)
    x = np.array([1.0])
    vals = [x[0] ** 2]
    for _ in range(50):
        st, x = grad_step(st, x, 2 * x)
        vals.append(float(x[0] ** 2))
    assert all(b < a for a, b in zip(vals[:11], vals[1:11]))
    assert max(vals[1:]) < vals[0] * 0.85
    assert min(vals) < 1e-4


def test_deterministic_trajectories():
    def traj():
        st = grad_init(2, 0.05)
        x = np.array([0.3, -0.7])
        out = []
        for _ in range(20):
            st, x = grad_step(st, x, np.array([2 * x[0], 4 * x[1] ** 3]))
            out.append(x.copy())
        return out

    for a, b in zip(traj(), traj()):
        assert np.array_equal(a, b)


def test_invalid_inputs():
    with pytest.raises(InvalidConfig):
        grad_init(2, -0.1)
    with pytest.raises(InvalidConfig):
        grad_init(2, 0.1, beta1=1.5)
    st = grad_init(2, 0.1)
    with pytest.raises(InvalidGradient):
        grad_step(st, np.zeros(2), np.array([np.inf, 0.0]))
    with pytest.raises(InvalidGradient):
        grad_step(st, np.zeros(3), np.zeros(3))
