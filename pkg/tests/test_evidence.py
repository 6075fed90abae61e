"""Thermodynamic-integration and misspecification-test checks."""

import math

import numpy as np
import pytest

from latentmc.evidence import (
    ReferenceDistribution,
    batch_means_se,
    estimate_evidence,
    misspecification_test,
    per_temperature_loglik_means,
    thermodynamic_integration,
)
from latentmc.forward_model import IdentityOperator, Observation, PotentialFn
from latentmc.generator import AffineDecoder
from latentmc.sampler import PcnConfig, TemperatureLadder, run_sampler


def affine_pf(W, b, y, sigma):
    W = np.atleast_2d(np.asarray(W, float))
    dec = AffineDecoder(W, np.asarray(b, float))
    obs = Observation(y=np.asarray(y, float), sigma=sigma,
                      operator=IdentityOperator(W.shape[0]))
    return PotentialFn(dec, obs)


def gaussian_evidence(W, b, y, sigma):
    """Closed form: p(y) = N(y; b, sigma^2 I + W W^T) for the affine model."""
    W = np.atleast_2d(np.asarray(W, float))
    p = W.shape[0]
    cov = sigma**2 * np.eye(p) + W @ W.T
    resid = np.asarray(y, float) - np.asarray(b, float)
    _, logdet = np.linalg.slogdet(cov)
    return -0.5 * (p * math.log(2 * math.pi) + logdet
                   + resid @ np.linalg.solve(cov, resid))


class TestPerTemperatureMeans:
    def test_constant_chain_exact(self):
        pf = affine_pf([[1.0]], [0.0], [0.7], 0.8)
        z_star = np.array([0.3])
        cfg = PcnConfig(n_samples=50, burn_in=0, master_seed=0)
        trace = run_sampler(pf, TemperatureLadder.single(), cfg)
        trace.samples[0, :, :] = z_star
        trace.potentials[0, :] = pf(z_star)
        means, ses = per_temperature_loglik_means(trace, pf)
        assert means[0] == pytest.approx(pf.log_likelihood(z_star), abs=1e-12)
        assert ses[0] == pytest.approx(0.0, abs=1e-12)

    def test_identical_traces_identical_means(self):
        pf = affine_pf([[1.0]], [0.0], [0.2], 1.0)
        cfg = PcnConfig(n_samples=500, burn_in=100, master_seed=1)
        trace = run_sampler(pf, TemperatureLadder((0.5, 1.0)), cfg)
        trace.samples[0] = trace.samples[1]
        trace.potentials[0] = trace.potentials[1]
        means, _ = per_temperature_loglik_means(trace, pf)
        assert means[0] == means[1]

    def test_empty_trace_rejected(self):
        pf = affine_pf([[1.0]], [0.0], [0.2], 1.0)
        cfg = PcnConfig(n_samples=0, burn_in=10, master_seed=1)
        trace = run_sampler(pf, TemperatureLadder.single(), cfg)
        with pytest.raises(ValueError, match="no post-burn-in"):
            per_temperature_loglik_means(trace, pf)

    def test_prior_chain_mean_matches_fresh_prior_draws(self):
        # the T = 0 chain's mean log-likelihood is the prior expectation of
        # log p(y|z); cross-check with an independent i.i.d. prior oracle
        pf = affine_pf([[1.0]], [0.0], [0.4], 1.0)
        cfg = PcnConfig(n_samples=40_000, burn_in=500, iid_t0=True, master_seed=5)
        trace = run_sampler(pf, TemperatureLadder((0.0, 1.0)), cfg)
        means, ses = per_temperature_loglik_means(trace, pf)

        rng = np.random.default_rng(1234)
        fresh = rng.standard_normal(200_000)
        oracle_vals = np.array(
            [pf.log_likelihood(np.array([z])) for z in fresh[:50_000]]
        )
        oracle = oracle_vals.mean()
        oracle_se = oracle_vals.std(ddof=1) / math.sqrt(len(oracle_vals))
        combined = math.sqrt(ses[0] ** 2 + oracle_se**2)
        assert abs(means[0] - oracle) < 3.0 * combined


class TestThermodynamicIntegration:
    def test_constant_integrand_exact(self):
        ladder = TemperatureLadder.power(10, 5.0)
        means = np.full(10, -1.2655)
        est = thermodynamic_integration(means, ladder)
        assert est.log_evidence == pytest.approx(-1.2655, abs=1e-12)

    def test_duplicate_temperature_contributes_nothing(self):
        temps = [0.0, 0.5, 1.0]
        means = np.array([-2.0, -1.0, -0.5])
        base = thermodynamic_integration(means, temps).log_evidence
        temps_dup = [0.0, 0.5, 0.5, 1.0]
        means_dup = np.array([-2.0, -1.0, -1.0, -0.5])
        dup = thermodynamic_integration(means_dup, temps_dup).log_evidence
        assert dup == pytest.approx(base, abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="means"):
            thermodynamic_integration(np.zeros(3), TemperatureLadder.linear(4))

    def test_warns_if_ladder_misses_zero(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="latentmc.evidence"):
            thermodynamic_integration(np.zeros(2), [0.5, 1.0])
        assert any("T0" in record.message for record in caplog.records)

    def test_se_propagates_in_quadrature(self):
        est = thermodynamic_integration(
            np.zeros(3), [0.0, 0.5, 1.0], standard_errors=np.array([1.0, 0.0, 0.0])
        )
        assert est.log_evidence_se == pytest.approx(0.25)

    def test_one_dim_affine_closed_form(self):
        # quick version of the acceptance criterion (small sample budget)
        pf = affine_pf([[1.0]], [0.0], [0.0], 1.0)
        truth = gaussian_evidence([[1.0]], [0.0], [0.0], 1.0)
        assert truth == pytest.approx(-0.5 * math.log(4 * math.pi), abs=1e-12)

        ladder = TemperatureLadder.power(10, 5.0)
        cfg = PcnConfig(n_samples=4_000, burn_in=1_000, iid_t0=True, master_seed=17)
        trace = run_sampler(pf, ladder, cfg)
        est = estimate_evidence(trace, pf)
        assert est.log_evidence == pytest.approx(truth, abs=0.1)

    def test_integrand_monotone_in_temperature(self):
        # E_T[log p(y|z)] is nondecreasing in T (power-posterior identity);
        # assert on estimated means up to 2 SE
        pf = affine_pf([[2.0]], [0.1], [1.5], 0.5)
        ladder = TemperatureLadder.power(8, 3.0)
        cfg = PcnConfig(n_samples=8_000, burn_in=2_000, iid_t0=True, master_seed=23)
        trace = run_sampler(pf, ladder, cfg)
        means, ses = per_temperature_loglik_means(trace, pf)
        for i in range(len(means) - 1):
            slack = 2.0 * math.sqrt(ses[i] ** 2 + ses[i + 1] ** 2)
            assert means[i + 1] >= means[i] - slack


class TestBatchMeansSe:
    def test_iid_matches_classic_se(self):
        rng = np.random.default_rng(60)
        x = rng.standard_normal(100_000)
        classic = x.std(ddof=1) / math.sqrt(len(x))
        assert batch_means_se(x) == pytest.approx(classic, rel=0.2)

    def test_short_series(self):
        assert batch_means_se(np.array([1.0, 2.0])) == 0.0


class TestMisspecificationTest:
    def test_below_reference_minimum_rejected(self):
        ref = ReferenceDistribution(np.linspace(-5.0, -1.0, 100))
        assert misspecification_test(ref, -10.0, 0.05) == "rejected"

    def test_at_median_accepted(self):
        values = np.linspace(-5.0, -1.0, 101)
        ref = ReferenceDistribution(values)
        assert misspecification_test(ref, float(np.median(values)), 0.05) == "in-dataset"

    def test_centile_linear_interpolation(self):
        ref = ReferenceDistribution(np.array([0.0, 1.0]))
        assert ref.centile(0.5) == pytest.approx(0.5)

    def test_save_load_roundtrip(self, tmp_path):
        ref = ReferenceDistribution(np.array([-3.0, -1.5, -2.25]),
                                    provenance="denoise sigma=0.1 seed=0")
        path = ref.save(tmp_path / "ref.csv")
        loaded = ReferenceDistribution.load(path)
        np.testing.assert_array_equal(loaded.values, np.sort(ref.values))
        assert "sigma=0.1" in loaded.provenance

    def test_significance_validated(self):
        ref = ReferenceDistribution(np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            misspecification_test(ref, 0.5, 0.0)
