"""sklearn-facade tests: params protocol, fit/sample/predict, cloning."""

import numpy as np
import pytest
from sklearn.base import clone

from latentmc import LatentPosteriorSampler
from latentmc.forward_model import IdentityOperator
from latentmc.generator import AffineDecoder


def make_decoder():
    return AffineDecoder(np.array([[1.0, 0.3], [-0.2, 0.8]]), np.array([0.1, -0.2]))


class TestParamsProtocol:
    def test_get_params_roundtrip(self):
        est = LatentPosteriorSampler(decoder=make_decoder(), sigma=0.5, seed=3)
        params = est.get_params()
        assert params["sigma"] == 0.5
        assert params["seed"] == 3
        est2 = LatentPosteriorSampler(**params)
        assert est2.get_params()["sigma"] == 0.5

    def test_set_params(self):
        est = LatentPosteriorSampler(decoder=make_decoder())
        est.set_params(sigma=0.25, n_samples=123)
        assert est.sigma == 0.25 and est.n_samples == 123

    def test_clone_preserves_config(self):
        est = LatentPosteriorSampler(decoder=make_decoder(), burn_in=77, seed=5)
        cloned = clone(est)
        assert cloned.burn_in == 77 and cloned.seed == 5
        assert not hasattr(cloned, "trace_")


class TestFitPredict:
    def test_fit_then_sample_and_predict(self):
        est = LatentPosteriorSampler(
            decoder=make_decoder(), sigma=0.5, n_samples=5_000, burn_in=500,
            ladder=(1.0,), seed=0,
        )
        y = np.array([1.0, 0.5])
        est.fit(y)
        samples = est.sample()
        assert samples.shape == (5_000, 2)
        image = est.predict()
        assert image.shape == (2,)
        assert est.posterior_summary_.n_used == 5_000

    def test_predict_matches_conjugate_mean(self):
        W = np.array([[1.0, 0.3], [-0.2, 0.8]])
        b = np.array([0.1, -0.2])
        y = np.array([1.0, 0.5])
        sigma = 0.5
        precision = np.eye(2) + W.T @ W / sigma**2
        post_mean = np.linalg.solve(precision, W.T @ (y - b) / sigma**2)
        truth = W @ post_mean + b

        est = LatentPosteriorSampler(
            decoder=AffineDecoder(W, b), sigma=sigma, n_samples=40_000,
            burn_in=2_000, ladder=(1.0,), beta0=0.3, seed=1,
        )
        image = est.fit(y).predict()
        np.testing.assert_allclose(image, truth, atol=0.03)

    def test_unfitted_errors(self):
        est = LatentPosteriorSampler(decoder=make_decoder())
        with pytest.raises(RuntimeError, match="not been fitted"):
            est.sample()

    def test_missing_decoder_errors(self):
        with pytest.raises(ValueError, match="decoder"):
            LatentPosteriorSampler().fit(np.zeros(2))

    def test_explicit_operator(self):
        est = LatentPosteriorSampler(
            decoder=make_decoder(), operator=IdentityOperator(2), sigma=0.4,
            n_samples=200, burn_in=50, ladder="linear", n_chains=3, seed=2,
        )
        est.fit(np.array([0.2, -0.1]))
        assert est.trace_.n_chains == 3

    def test_log_evidence_runs_with_zero_ladder(self):
        est = LatentPosteriorSampler(
            decoder=make_decoder(), sigma=1.0, n_samples=2_000, burn_in=500,
            ladder="power5", n_chains=6, seed=4,
        )
        est.fit(np.array([0.0, 0.0]))
        value = est.log_evidence()
        assert np.isfinite(value)

    def test_same_seed_reproduces(self):
        kwargs = dict(decoder=make_decoder(), sigma=0.5, n_samples=1_000,
                      burn_in=100, ladder=(1.0,), seed=9)
        a = LatentPosteriorSampler(**kwargs).fit(np.array([0.3, 0.3])).sample()
        b = LatentPosteriorSampler(**kwargs).fit(np.array([0.3, 0.3])).sample()
        assert a.tobytes() == b.tobytes()
