"""scikit-learn style facade over the sampling pipeline.

``LatentPosteriorSampler`` holds a decoder and an observation model as
constructor parameters (so ``get_params`` / ``set_params`` / ``clone``
compose with the wider ecosystem), runs the parallel-tempered sampler on
``fit(y)``, and exposes the posterior through ``sample`` and ``predict``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .analysis import mmse_estimate
from .evidence import estimate_evidence
from .forward_model import IdentityOperator, Observation, PotentialFn
from .sampler import PcnConfig, TemperatureLadder, run_sampler


class LatentPosteriorSampler(BaseEstimator):
    """Posterior sampler conditioning on an observed image.

    Parameters
    ----------
    decoder:
        A Decoder mapping R^m -> R^d.
    operator:
        ForwardOperator; identity over the decoder's ambient space if None.
    sigma:
        Gaussian noise standard deviation of the observation model.
    ladder:
        "linear", "power5", or an explicit temperature tuple ending at 1.
    n_chains:
        Ladder size when ``ladder`` is a named scheme.
    beta0, target_accept, rm_c, swap_every, burn_in, n_samples, seed,
    n_threads:
        Sampler configuration, passed through to PcnConfig.

    After ``fit(y)``: ``trace_`` holds the TraceStore, ``potential_fn_`` the
    potential; ``predict()`` returns the MMSE image and caches the posterior
    summary on ``posterior_summary_``.
    """

    def __init__(self, decoder=None, operator=None, sigma=0.1, ladder="linear",
                 n_chains=3, beta0=0.1, target_accept=0.25, rm_c=1.0,
                 swap_every=10, burn_in=2000, n_samples=10_000, seed=0,
                 n_threads=1):
        self.decoder = decoder
        self.operator = operator
        self.sigma = sigma
        self.ladder = ladder
        self.n_chains = n_chains
        self.beta0 = beta0
        self.target_accept = target_accept
        self.rm_c = rm_c
        self.swap_every = swap_every
        self.burn_in = burn_in
        self.n_samples = n_samples
        self.seed = seed
        self.n_threads = n_threads

    def _resolve_ladder(self):
        if isinstance(self.ladder, TemperatureLadder):
            return self.ladder
        if isinstance(self.ladder, str):
            return TemperatureLadder.from_spec(self.ladder, self.n_chains)
        return TemperatureLadder(tuple(self.ladder))

    def fit(self, y, X=None):
        """Condition on the observation y and run the sampler."""
        if self.decoder is None:
            raise ValueError("a decoder is required")
        y = np.asarray(y, dtype=np.float64).ravel()
        operator = self.operator or IdentityOperator(self.decoder.ambient_dim)
        observation = Observation(y=y, sigma=self.sigma, operator=operator)
        self.potential_fn_ = PotentialFn(self.decoder, observation)
        config = PcnConfig(
            n_samples=self.n_samples,
            beta0=self.beta0,
            target_accept=self.target_accept,
            rm_c=self.rm_c,
            swap_every=self.swap_every,
            burn_in=self.burn_in,
            master_seed=self.seed,
            n_threads=self.n_threads,
        )
        self.ladder_ = self._resolve_ladder()
        self.trace_ = run_sampler(self.potential_fn_, self.ladder_, config)
        return self

    def _check_fitted(self):
        if not hasattr(self, "trace_"):
            raise RuntimeError("this sampler has not been fitted; call fit(y) first")

    def sample(self, n=None):
        """Posterior latent samples from the T = 1 chain (first n if given)."""
        self._check_fitted()
        samples = self.trace_.posterior_samples
        return samples if n is None else samples[:n]

    def predict(self):
        """MMSE reconstruction: the pixel-space mean of decoded samples."""
        self._check_fitted()
        self.posterior_summary_ = mmse_estimate(
            self.trace_.posterior_samples, self.decoder
        )
        return self.posterior_summary_.mmse_image

    def log_evidence(self):
        """Thermodynamic-integration log marginal likelihood.

        Requires a ladder starting at T = 0 (otherwise the estimate is
        biased; a warning is logged by the evidence module).
        """
        self._check_fitted()
        self.evidence_ = estimate_evidence(self.trace_, self.potential_fn_)
        return self.evidence_.log_evidence
