"""Posterior summaries from traces: MMSE estimate, covariance PCA,
highest-posterior-density thresholds, coverage experiments, and the
latent-dimension diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import as_vector
from .sampler import run_sampler

_LOG_2PI = math.log(2.0 * math.pi)


def standard_normal_logpdf(z):
    """Log density of N(0, I_m) at z (the latent prior)."""
    z = np.asarray(z, dtype=np.float64)
    return -0.5 * (z.shape[-1] * _LOG_2PI + np.sum(z * z, axis=-1))


@dataclass(frozen=True)
class PosteriorSummary:
    """Pixel-space posterior mean and per-pixel sample variance."""

    mmse_image: np.ndarray
    pixel_variances: np.ndarray
    n_used: int


@dataclass(frozen=True)
class PcaMap:
    """Eigendecomposition of the latent posterior sample covariance."""

    eigenvalues: np.ndarray       # descending, nonnegative up to roundoff
    components: np.ndarray        # (m, m), columns are latent directions
    projected_samples: np.ndarray  # (n, 2) coordinates on the 2 leading axes
    mean: np.ndarray              # latent sample mean (projection center)


@dataclass(frozen=True)
class CoverageResult:
    nominal_levels: np.ndarray
    empirical_coverage: np.ndarray
    n_replicates: int
    n_samples_per_replicate: int


def mmse_estimate(samples, decoder, chunk_size=4096):
    """Monte Carlo posterior mean in pixel space, x = mean of mu(z_i).

    The mean is taken over decoded images rather than decoded at the latent
    mean, so the estimate is not forced onto the decoder manifold.  Also
    returns per-pixel sample variances.  Decoding is chunked to bound memory.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("mmse_estimate needs a nonempty (n, m) sample matrix")
    n = samples.shape[0]
    d = decoder.ambient_dim
    total = np.zeros(d)
    total_sq = np.zeros(d)
    pivot = None
    for start in range(0, n, chunk_size):
        block = decoder.decode_batch(samples[start : start + chunk_size])
        if pivot is None:
            pivot = block[0].copy()  # shift for numerically stable variance
        shifted = block - pivot
        total += shifted.sum(axis=0)
        total_sq += (shifted * shifted).sum(axis=0)
    mean_shifted = total / n
    mmse = pivot + mean_shifted
    if n > 1:
        variances = np.maximum(total_sq - n * mean_shifted**2, 0.0) / (n - 1)
    else:
        variances = np.zeros(d)
    return PosteriorSummary(mmse_image=mmse, pixel_variances=variances, n_used=n)


def posterior_pca(samples):
    """PCA of the latent sample covariance via symmetric eigendecomposition.

    The m x m covariance is tiny (m is a few dozen at most), so an eigh on it
    beats an SVD of the full sample matrix.  Projections are centered at the
    sample mean; a rank-deficient covariance yields zero eigenvalues, which
    is not an error.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n, m = samples.shape
    if n < m + 1:
        raise ValueError(f"posterior_pca needs at least m+1 = {m + 1} samples, got {n}")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    components = eigenvectors[:, order]
    n_proj = min(2, m)
    projected = np.zeros((n, 2))
    projected[:, :n_proj] = centered @ components[:, :n_proj]
    return PcaMap(
        eigenvalues=eigenvalues,
        components=components,
        projected_samples=projected,
        mean=mean,
    )


def log_posterior_density(samples, pf, prior_logpdf=standard_normal_logpdf):
    """Unnormalized log posterior density log p(z) - Phi(z) per sample."""
    samples = np.asarray(samples, dtype=np.float64)
    log_prior = prior_logpdf(samples)
    phis = np.array([pf(z) for z in samples])
    return log_prior - phis


def hpd_threshold(samples, pf, prior_logpdf=standard_normal_logpdf, level=0.1,
                  log_densities=None):
    """Empirical ``level``-quantile of the per-sample unnormalized log
    posterior density.  The level-(1-alpha) HPD region at alpha = level is
    {z : log p(z) - Phi(z) >= threshold}.  Quantiles interpolate linearly
    between order statistics, so the threshold is monotone in ``level``.
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError("level must lie in [0, 1]")
    if log_densities is None:
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[0] == 0:
            raise ValueError("hpd_threshold needs a nonempty trace")
        log_densities = log_posterior_density(samples, pf, prior_logpdf)
    if len(log_densities) == 0:
        raise ValueError("hpd_threshold needs a nonempty trace")
    return float(np.quantile(log_densities, level))


def coverage_experiment(test_images, encode_fn, pf_factory, ladder, config,
                        levels, master_seed=0, prior_logpdf=standard_normal_logpdf):
    """Frequentist coverage of HPD credible sets over simulated observations.

    For each test image x: ``pf_factory(x, rng)`` simulates an observation
    y ~ p(y|x) and returns the matching PotentialFn; the posterior is sampled;
    for each nominal level the HPD threshold is the (1-level)-quantile of the
    sampled log posterior densities; the image "is covered" when the log
    posterior density at its encoding ``encode_fn(x, rng)`` clears the
    threshold.  Per-replicate seeds derive from ``master_seed``, so replicates
    are independent and the experiment is reproducible.
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or len(levels) == 0:
        raise ValueError("levels must be a nonempty vector")
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("levels must lie in (0, 1)")
    test_images = [as_vector(x, f"test image {i}") for i, x in enumerate(test_images)]
    if not test_images:
        raise ValueError("coverage_experiment needs at least one test image")

    hits = np.zeros(len(levels), dtype=np.int64)
    seeds = np.random.SeedSequence(master_seed).spawn(len(test_images))
    for i, (x_true, seed) in enumerate(zip(test_images, seeds)):
        rng = np.random.default_rng(seed)
        sampler_seed = int(seed.generate_state(1, dtype=np.uint64)[0] >> 1)
        try:
            pf = pf_factory(x_true, rng)
            trace = run_sampler(
                pf, ladder, replace(config, master_seed=sampler_seed)
            )
        except Exception as exc:
            raise RuntimeError(f"coverage replicate {i} failed") from exc
        log_dens = log_posterior_density(trace.posterior_samples, pf, prior_logpdf)
        z_true = as_vector(encode_fn(x_true, rng), "encoded truth", pf.latent_dim)
        log_dens_true = float(prior_logpdf(z_true) - pf(z_true))
        for li, level in enumerate(levels):
            threshold = hpd_threshold(None, pf, level=1.0 - level,
                                      log_densities=log_dens)
            hits[li] += log_dens_true >= threshold
    return CoverageResult(
        nominal_levels=levels,
        empirical_coverage=hits / len(test_images),
        n_replicates=len(test_images),
        n_samples_per_replicate=config.n_samples,
    )


def latent_dim_diagnostic(encoded_means):
    """Trace of the sample covariance of encoder means, plus per-dimension
    variances.  A trace close to m indicates an adequately sized latent
    space; a trace well below m flags redundant dimensionality."""
    encoded = np.asarray(encoded_means, dtype=np.float64)
    if encoded.ndim != 2 or encoded.shape[0] < 2:
        raise ValueError("latent_dim_diagnostic needs at least 2 encodings")
    per_dim = encoded.var(axis=0, ddof=1)
    return float(per_dim.sum()), per_dim
