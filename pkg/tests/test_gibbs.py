import math

import numpy as np
import pytest

from smnreg import (
    ChainState,
    Dataset,
    GammaMixing,
    ImproperModel,
    InvalidParameterError,
    InverseWishartParams,
    NIWPrior,
    PointMass,
    ProperModel,
    RankDeficiencyError,
    compute_update,
    run_chain,
    sample_matrix_normal_inverse_wishart,
    step_improper,
    step_proper,
    write_trace_csv,
    write_trace_meta,
)
from smnreg.gibbs import trace_columns, validate_improper
from tests.conftest import random_dataset, random_prior, random_state


def toy_problem(rng, n=20, p=2, d=2, mixing=None):
    mixing = mixing or GammaMixing(2.5, 2.5)
    beta = rng.standard_normal((p, d))
    sigma = np.array([[1.0, 0.3], [0.3, 1.0]])[:d, :d]
    from smnreg import simulate_dataset

    data, _ = simulate_dataset(n, p, d, mixing, beta, sigma, rng)
    return data


class TestStepProper:
    def test_state_shapes_and_validity(self, rng):
        data = toy_problem(rng)
        prior = NIWPrior.default(data.p, data.d)
        state = random_state(rng, data.n, data.p, data.d)
        new = step_proper(state, data, prior, GammaMixing(2.5, 2.5), rng)
        assert new.beta.shape == (data.p, data.d)
        assert new.u.shape == (data.n,)
        np.linalg.cholesky(new.sigma)

    def test_conjugate_sigma_oracle(self, rng):
        # PointMass mixing fixes u = 1, so Sigma^{-1} draws are iid Wishart
        # with mean (n + dof) psi(1)^{-1}.
        data = toy_problem(rng, n=25, mixing=PointMass(1.0))
        prior = NIWPrior.default(data.p, data.d)
        model = ProperModel(prior, PointMass(1.0))
        trace = run_chain(model, data, iters=4500, burnin=500, seed=9)
        upd = compute_update(np.ones(data.n), data, prior)
        target = (data.n + prior.dof) * np.linalg.inv(upd.psi)
        prec = np.linalg.inv(trace.sigmas)
        se = prec.std(axis=0, ddof=1) / math.sqrt(len(trace))
        assert np.all(np.abs(prec.mean(axis=0) - target) < 3.5 * se)

    def test_empty_data_rejected(self):
        with pytest.raises(InvalidParameterError):
            Dataset(np.zeros((0, 2)), np.zeros((0, 2)))


class TestStepImproper:
    def test_inverse_weight_mean(self):
        # The weight conditional is Gamma((t_dof + d)/2, (t_dof + delta)/2);
        # E[1/u] = (t_dof + delta)/(t_dof + d - 2) = 7/6 at t_dof=5, d=3, delta=2.
        h = GammaMixing.student_t(5.0)
        assert h.conditional_moment(2.0, 3, -1.0).value == pytest.approx(7.0 / 6.0)

    def test_precision_conditional_mean(self, rng):
        # With u frozen, Sigma^{-1} draws average to (n-p) S^{-1}.
        data = toy_problem(rng, n=15, p=2, d=2)
        u = rng.gamma(2.0, 1.0, size=data.n) + 0.1
        x, y = data.X, data.Y
        prec = x.T @ (u[:, None] * x)
        gamma = np.linalg.solve(prec, x.T @ (u[:, None] * y))
        resid = y - x @ gamma
        s = resid.T @ (u[:, None] * resid)
        iw = InverseWishartParams(data.n - data.p, s)
        draws = np.linalg.inv(
            __import__("smnreg").sample_inverse_wishart(iw, rng, size=100_000)
        )
        target = (data.n - data.p) * np.linalg.inv(s)
        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - target) < 3.0 * se)

    def test_minimum_sample_size_boundary(self, rng):
        # n = p + d exactly: Wishart dof is d, the smallest valid value.
        p = d = 1
        data = Dataset([[1.0], [0.0]], [[0.0], [1.0]])
        state = ChainState(np.zeros((p, d)), np.eye(d), np.ones(2))
        new = step_improper(state, data, 5.0, rng)
        np.linalg.cholesky(new.sigma)

    def test_too_few_rows_rejected(self, rng):
        data = Dataset([[1.0], [2.0]], [[0.5, 1.0], [1.5, 2.0]])  # n=2 < p+d=3
        state = ChainState(np.zeros((1, 2)), np.eye(2), np.ones(2))
        with pytest.raises(InvalidParameterError, match="n >= p \\+ d"):
            step_improper(state, data, 5.0, rng)

    def test_rank_deficient_rejected(self):
        x = np.ones((6, 2))  # duplicated column
        y = np.arange(6.0).reshape(6, 1)
        with pytest.raises(RankDeficiencyError):
            validate_improper(Dataset(x, y), 5.0)

    def test_scale_equivariance(self, rng):
        # Rescaling Y by c maps beta -> c beta and Sigma -> c^2 Sigma when the
        # chains share the same random stream.
        data = toy_problem(rng, n=12, p=2, d=2)
        c = 3.7
        scaled = Dataset(data.X, c * data.Y)
        model_a = ImproperModel(t_dof=4.0)
        init = ChainState(np.zeros((2, 2)), np.eye(2), np.ones(12))
        init_scaled = ChainState(np.zeros((2, 2)), c**2 * np.eye(2), np.ones(12))
        tr_a = run_chain(model_a, data, iters=40, seed=123, init=init)
        tr_b = run_chain(model_a, scaled, iters=40, seed=123, init=init_scaled)
        np.testing.assert_allclose(tr_b.betas, c * tr_a.betas, rtol=1e-9)
        np.testing.assert_allclose(tr_b.sigmas, c**2 * tr_a.sigmas, rtol=1e-9)

    def test_sigma_spd_along_run(self, rng):
        data = toy_problem(rng, n=10, p=2, d=2)
        trace = run_chain(ImproperModel(t_dof=3.0), data, iters=300, seed=2)
        for s in trace.states:
            np.linalg.cholesky(s.sigma)


class TestRunChain:
    def test_trace_length_arithmetic(self, rng):
        data = toy_problem(rng, n=8)
        model = ProperModel(NIWPrior.default(2, 2), PointMass(1.0))
        trace = run_chain(model, data, iters=100, burnin=50, thin=5, seed=4)
        assert len(trace) == 10

    def test_determinism(self, rng):
        data = toy_problem(rng, n=8)
        model = ProperModel(NIWPrior.default(2, 2), GammaMixing(2.0, 2.0))
        a = run_chain(model, data, iters=60, burnin=10, seed=77)
        b = run_chain(model, data, iters=60, burnin=10, seed=77)
        np.testing.assert_array_equal(a.betas, b.betas)
        np.testing.assert_array_equal(a.sigmas, b.sigmas)
        np.testing.assert_array_equal(a.us, b.us)

    def test_different_seeds_differ(self, rng):
        data = toy_problem(rng, n=8)
        model = ProperModel(NIWPrior.default(2, 2), GammaMixing(2.0, 2.0))
        a = run_chain(model, data, iters=30, seed=1)
        b = run_chain(model, data, iters=30, seed=2)
        assert not np.array_equal(a.betas, b.betas)

    def test_conjugate_trace_mean(self, rng):
        data = toy_problem(rng, n=20, mixing=PointMass(1.0))
        prior = NIWPrior.default(2, 2)
        model = ProperModel(prior, PointMass(1.0))
        trace = run_chain(model, data, iters=4000, burnin=500, seed=31)
        upd = compute_update(np.ones(data.n), data, prior)
        target = (data.n + prior.dof) * np.trace(np.linalg.inv(upd.psi))
        vals = np.array([np.trace(np.linalg.inv(s)) for s in trace.sigmas])
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - target) < 3.5 * se

    def test_bad_iteration_counts(self, rng):
        data = toy_problem(rng, n=8)
        model = ProperModel(NIWPrior.default(2, 2), PointMass(1.0))
        with pytest.raises(InvalidParameterError):
            run_chain(model, data, iters=10, burnin=10, seed=0)
        with pytest.raises(InvalidParameterError):
            run_chain(model, data, iters=10, burnin=0, thin=0, seed=0)


class TestTraceSerialization:
    def test_csv_layout(self, rng, tmp_path):
        data = toy_problem(rng, n=6)
        model = ProperModel(NIWPrior.default(2, 2), GammaMixing(2.0, 2.0))
        trace = run_chain(model, data, iters=25, burnin=5, seed=8)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path, emit_u=True)
        lines = path.read_text().strip().split("\n")
        assert lines[0].split(",") == trace_columns(2, 2, 6, emit_u=True)
        assert len(lines) == 1 + len(trace)
        first = [float(v) for v in lines[1].split(",")]
        np.testing.assert_array_equal(first[:4], trace.states[0].beta.ravel())

    def test_meta_sidecar(self, rng, tmp_path):
        import json

        data = toy_problem(rng, n=6)
        model = ProperModel(NIWPrior.default(2, 2), GammaMixing(2.0, 2.0))
        trace = run_chain(model, data, iters=25, burnin=5, thin=2, seed=8)
        path = tmp_path / "trace.meta.json"
        write_trace_meta(trace, path)
        meta = json.loads(path.read_text())
        assert meta["iterations"] == 25
        assert meta["burnin"] == 5
        assert meta["thin"] == 2
        assert meta["underflow_clamps"] == 0
        assert len(meta["model"]) == 12

    def test_fingerprint_distinguishes_models(self, rng):
        from smnreg.gibbs import model_fingerprint

        a = ProperModel(NIWPrior.default(2, 2), GammaMixing(2.0, 2.0))
        b = ProperModel(NIWPrior.default(2, 2), GammaMixing(2.0, 2.1))
        c = ImproperModel(t_dof=4.0)
        assert len({model_fingerprint(m) for m in (a, b, c)}) == 3
