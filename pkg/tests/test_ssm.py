import numpy as np
import pytest

from nuvbox.errors import DimensionMismatch, UnderdeterminedModel
from nuvbox.gaussian import VARIANCE_FLOOR, GaussianMsg, GaussianVecMsg
from nuvbox.ssm import FactorSet, LinearSSM, dense_solve, lowpass_model, simulate, smooth


def identity_chain(K=1):
    x0 = GaussianVecMsg(np.zeros(1), VARIANCE_FLOOR * np.eye(1))
    return LinearSSM(A=[[1.0]], B=[[1.0]], C=[[1.0]], K=K, x0=x0)


def random_model(rng, n, m, p, K):
    A = rng.normal(size=(n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    A = A / (rho / rng.uniform(0.3, 0.9)) if rho > 0 else A
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    x0 = GaussianVecMsg(rng.normal(size=n), rng.uniform(0.5, 5.0) * np.eye(n))
    return LinearSSM(A=A, B=B, C=C, K=K, x0=x0)


def random_factors(rng, model, input_prob=0.8, output_prob=0.7):
    fs = FactorSet(model)
    for k in range(1, model.K + 1):
        for j in range(model.m):
            if rng.random() < input_prob:
                fs.add_input(k, j, GaussianMsg(rng.normal(), rng.uniform(0.05, 20.0)))
            else:
                fs.add_input(k, j, GaussianMsg(0.0, rng.uniform(5.0, 50.0)))
        for i in range(model.p):
            if rng.random() < output_prob:
                fs.add_output(k, i, GaussianMsg(rng.normal(), rng.uniform(0.05, 20.0)))
    return fs


class TestSmoothExamples:
    def test_identity_chain_single_output(self):
        model = identity_chain()
        fs = FactorSet(model)
        fs.add_output(1, 0, GaussianMsg(3.0, 1.0))
        post = smooth(model, fs)
        assert post.u_mean[0, 0] == pytest.approx(3.0, abs=1e-9)
        assert post.y_mean[0, 0] == pytest.approx(3.0, abs=1e-9)

    def test_two_step_matches_dense(self):
        model = identity_chain(K=2)
        fs = FactorSet(model)
        for k in (1, 2):
            fs.add_output(k, 0, GaussianMsg(1.0, 1.0))
            fs.add_input(k, 0, GaussianMsg(0.0, 1.0))
        a = smooth(model, fs)
        b = dense_solve(model, fs)
        np.testing.assert_allclose(a.u_mean, b.u_mean, rtol=1e-10)
        np.testing.assert_allclose(a.y_mean, b.y_mean, rtol=1e-10)
        np.testing.assert_allclose(a.u_var, b.u_var, rtol=1e-8)

    def test_dirac_input_factor(self):
        model = identity_chain(K=3)
        fs = FactorSet(model)
        fs.add_input(2, 0, GaussianMsg(1.5, VARIANCE_FLOOR))
        for k in (1, 3):
            fs.add_input(k, 0, GaussianMsg(0.0, 1.0))
        fs.add_output(3, 0, GaussianMsg(0.0, 1.0))
        post = smooth(model, fs)
        assert post.u_mean[1, 0] == pytest.approx(1.5, abs=1e-6)

    def test_zero_problem(self):
        rng = np.random.default_rng(0)
        model = random_model(rng, 3, 2, 1, 10)
        model = LinearSSM(model.A, model.B, model.C, 10, GaussianVecMsg(np.zeros(3), np.eye(3)))
        fs = FactorSet(model)
        for k in range(1, 11):
            for j in range(2):
                fs.add_input(k, j, GaussianMsg(0.0, 1.0))
        post = smooth(model, fs)
        np.testing.assert_allclose(post.u_mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(post.x_mean, 0.0, atol=1e-12)


class TestSmoothDenseEquivalence:
    def test_random_models(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            n = rng.integers(1, 5)
            m = rng.integers(1, 3)
            p = rng.integers(1, 3)
            K = rng.integers(2, 31)
            model = random_model(rng, n, m, p, K)
            fs = random_factors(rng, model)
            a = smooth(model, fs)
            b = dense_solve(model, fs)
            scale = np.max(np.abs(b.u_mean)) + 1.0
            np.testing.assert_allclose(a.u_mean, b.u_mean, rtol=1e-8, atol=1e-8 * scale)
            np.testing.assert_allclose(a.x_mean, b.x_mean, rtol=1e-8, atol=1e-8 * scale)
            np.testing.assert_allclose(a.y_mean, b.y_mean, rtol=1e-8, atol=1e-8 * scale)
            np.testing.assert_allclose(a.u_var, b.u_var, rtol=1e-7, atol=1e-9)
            np.testing.assert_allclose(a.y_var, b.y_var, rtol=1e-7, atol=1e-9)

    def test_with_direction_and_vector_factors(self):
        rng = np.random.default_rng(78)
        model = random_model(rng, 3, 2, 2, 12)
        fs = random_factors(rng, model)
        w = rng.normal(size=2)
        w /= np.linalg.norm(w)
        fs.add_output_dir(5, w, GaussianMsg(0.3, 0.5))
        fs.add_output_obs(9, GaussianVecMsg(rng.normal(size=2), 0.7 * np.eye(2)))
        a = smooth(model, fs)
        b = dense_solve(model, fs)
        np.testing.assert_allclose(a.u_mean, b.u_mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(a.y_var, b.y_var, rtol=1e-7, atol=1e-10)

    def test_gradient_optimality(self):
        # posterior means minimize the stacked quadratic: residual gradient ~ 0
        rng = np.random.default_rng(79)
        model = random_model(rng, 2, 1, 1, 8)
        fs = random_factors(rng, model)
        post = smooth(model, fs)
        eps = 1e-6
        u0 = post.u_mean.copy()

        def objective(u):
            x = model.x0.mean.copy()
            val = 0.0
            d0 = post.x_mean[0] - model.x0.mean
            val += 0.5 * d0 @ np.linalg.solve(model.x0.covariance, d0)
            x = post.x_mean[0]
            for k in range(1, model.K + 1):
                x = model.A @ x + model.B @ u[k - 1]
                prec = fs.in_prec[k - 1]
                val += 0.5 * float(prec @ (u[k - 1] - fs.in_wmean[k - 1] / np.maximum(prec, 1e-300)) ** 2)
                y = model.C @ x
                oprec = fs.out_prec[k - 1]
                mask = oprec > 0
                if mask.any():
                    target = fs.out_wmean[k - 1][mask] / oprec[mask]
                    val += 0.5 * float(oprec[mask] @ (y[mask] - target) ** 2)
            return val

        base = objective(u0)
        for k in (0, 3, 7):
            u = u0.copy()
            u[k, 0] += eps
            up = objective(u)
            u[k, 0] -= 2 * eps
            dn = objective(u)
            grad = (up - dn) / (2 * eps)
            assert abs(grad) <= 1e-5 * (1.0 + abs(base))

    def test_flat_factor_is_noop(self):
        rng = np.random.default_rng(80)
        model = random_model(rng, 2, 1, 1, 6)
        fs = random_factors(rng, model)
        before = smooth(model, fs)
        fs.add_input(3, 0, GaussianMsg.flat())
        fs.add_output(2, 0, GaussianMsg(0.0, np.inf))
        after = smooth(model, fs)
        assert np.array_equal(before.u_mean, after.u_mean)
        assert np.array_equal(before.x_var, after.x_var)


class TestErrors:
    def test_no_finite_factor(self):
        model = identity_chain(K=2)
        fs = FactorSet(model)
        with pytest.raises(UnderdeterminedModel):
            smooth(model, fs)

    def test_unpinned_input(self):
        # second input channel couples to nothing: B column of zeros, no factor
        model = LinearSSM(A=[[1.0]], B=[[1.0, 0.0]], C=[[1.0]], K=2)
        fs = FactorSet(model)
        for k in (1, 2):
            fs.add_input(k, 0, GaussianMsg(0.0, 1.0))
            fs.add_output(k, 0, GaussianMsg(1.0, 1.0))
        with pytest.raises(UnderdeterminedModel):
            smooth(model, fs)
        with pytest.raises(UnderdeterminedModel):
            dense_solve(model, fs)

    def test_dimension_mismatch(self):
        model = identity_chain(K=2)
        fs = FactorSet(model)
        with pytest.raises(DimensionMismatch):
            fs.add_input(3, 0, GaussianMsg(0.0, 1.0))
        with pytest.raises(DimensionMismatch):
            fs.add_input(1, 1, GaussianMsg(0.0, 1.0))
        with pytest.raises(DimensionMismatch):
            fs.add_output_dir(1, np.ones(2), GaussianMsg(0.0, 1.0))
        with pytest.raises(DimensionMismatch):
            LinearSSM(A=[[1.0]], B=[[1.0], [0.0]], C=[[1.0]], K=1)
        with pytest.raises(DimensionMismatch):
            LinearSSM(A=[[1.0]], B=[[1.0]], C=[[1.0]], K=0)


class TestSimulate:
    def test_zero_input_zero_output(self):
        model = lowpass_model(20)
        y = simulate(model, np.zeros(20))
        np.testing.assert_allclose(y, 0.0, atol=1e-15)

    def test_passthrough(self):
        model = LinearSSM(A=[[0.0]], B=[[1.0]], C=[[1.0]], K=5)
        u = np.arange(1.0, 6.0)
        y = simulate(model, u)
        np.testing.assert_allclose(y[:, 0], u)

    def test_lowpass_step_response(self):
        model = lowpass_model(120)
        y = simulate(model, np.ones(120))[:, 0]
        diffs = np.diff(np.concatenate([[0.0], y]))
        assert np.all(diffs >= -1e-12)  # monotone step response
        dc = model.C @ np.linalg.solve(np.eye(3) - model.A, model.B)
        assert dc[0, 0] == pytest.approx(1.0, rel=1e-9)
        assert y[-1] == pytest.approx(1.0, rel=1e-6)

    def test_bad_shape(self):
        model = lowpass_model(10)
        with pytest.raises(DimensionMismatch):
            simulate(model, np.zeros(9))


def test_posterior_dynamics_identity():
    # posterior means satisfy the deterministic dynamics exactly
    rng = np.random.default_rng(90)
    model = random_model(rng, 3, 2, 2, 15)
    fs = random_factors(rng, model)
    post = smooth(model, fs)
    for k in range(1, 16):
        pred = model.A @ post.x_mean[k - 1] + model.B @ post.u_mean[k - 1]
        np.testing.assert_allclose(post.x_mean[k], pred, rtol=0, atol=1e-12)
    np.testing.assert_allclose(post.y_mean, post.x_mean[1:] @ model.C.T, atol=1e-12)
