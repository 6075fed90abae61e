"""Marginal likelihood by thermodynamic integration over the temperature
ladder, and the out-of-dataset misspecification test.

The identity log p(y) = integral over T in [0,1] of E_{z|y,T}[log p(y|z)] dT
is discretized by the trapezoid rule on the ladder; the per-temperature
expectations are Monte Carlo means over each tempered chain's trace, so the
estimate comes almost for free after a parallel-tempered run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sampler import TemperatureLadder

logger = logging.getLogger(__name__)


def batch_means_se(values):
    """Monte Carlo standard error by batch means with ceil(sqrt(N)) batches.

    Robust to autocorrelation; returns 0 for fewer than 4 points.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n < 4:
        return 0.0
    n_batches = math.ceil(math.sqrt(n))
    batch_size = n // n_batches
    used = n_batches * batch_size
    means = values[:used].reshape(n_batches, batch_size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def per_temperature_loglik_means(trace_store, pf):
    """Mean of log p(y|z) over each temperature's post-burn-in samples,
    with batch-means standard errors.  Returns (means, standard_errors)."""
    k = trace_store.n_chains
    if trace_store.n_samples == 0:
        raise ValueError("trace store has no post-burn-in samples")
    const = pf.log_likelihood(np.zeros(pf.latent_dim)) + pf(np.zeros(pf.latent_dim))
    means = np.empty(k)
    ses = np.empty(k)
    for i in range(k):
        # log p(y|z) = const - Phi(z); stored potentials make this free
        logliks = const - trace_store.potentials[i]
        means[i] = logliks.mean()
        ses[i] = batch_means_se(logliks)
    return means, ses


@dataclass(frozen=True)
class EvidenceEstimate:
    log_evidence: float
    per_temperature_means: np.ndarray
    ladder: tuple
    mc_standard_errors: np.ndarray
    log_evidence_se: float

    def as_dict(self):
        return {
            "log_evidence": self.log_evidence,
            "log_evidence_se": self.log_evidence_se,
            "ladder": list(self.ladder),
            "per_temperature_means": self.per_temperature_means.tolist(),
            "mc_standard_errors": self.mc_standard_errors.tolist(),
        }


def thermodynamic_integration(per_temperature_means, ladder, standard_errors=None):
    """Trapezoidal estimate of log p(y) from per-temperature expectations.

    Requires T_0 = 0 for the identity to hold; a ladder starting above 0
    carries unbounded discretization bias and triggers a warning.  MC
    standard errors propagate in quadrature through the trapezoid weights.
    Unlike the sampler's ladder, duplicate temperatures are tolerated here:
    a zero-width panel contributes nothing.
    """
    if isinstance(ladder, TemperatureLadder):
        temps = ladder.as_array()
    else:
        temps = np.asarray(ladder, dtype=np.float64)
        if temps.ndim != 1 or np.any(np.diff(temps) < 0):
            raise ValueError("ladder temperatures must be sorted nondecreasing")
    means = np.asarray(per_temperature_means, dtype=np.float64)
    if means.shape != temps.shape:
        raise ValueError(
            f"ladder has {temps.shape[0]} temperatures but "
            f"{means.shape[0]} means were given"
        )
    if temps[0] > 0.0:
        logger.warning(
            "ladder starts at T0=%g > 0: thermodynamic integration is biased "
            "by the missing [0, T0] panel",
            temps[0],
        )
    widths = np.diff(temps)
    log_evidence = float(np.sum(widths * (means[1:] + means[:-1]) / 2.0))

    if standard_errors is None:
        ses = np.zeros_like(means)
    else:
        ses = np.asarray(standard_errors, dtype=np.float64)
        if ses.shape != means.shape:
            raise ValueError("standard_errors length must match the ladder")
    # trapezoid weight of each node
    weights = np.zeros_like(means)
    weights[:-1] += widths / 2.0
    weights[1:] += widths / 2.0
    se = float(np.sqrt(np.sum((weights * ses) ** 2)))
    return EvidenceEstimate(
        log_evidence=log_evidence,
        per_temperature_means=means,
        ladder=tuple(temps),
        mc_standard_errors=ses,
        log_evidence_se=se,
    )


def estimate_evidence(trace_store, pf):
    """Convenience wrapper: per-temperature means + trapezoid in one call."""
    means, ses = per_temperature_loglik_means(trace_store, pf)
    return thermodynamic_integration(means, trace_store.temperatures, ses)


@dataclass(frozen=True)
class ReferenceDistribution:
    """Sorted log-evidence values from in-dataset observations, used as the
    null reference for the misspecification test."""

    values: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 1 or values.shape[0] == 0:
            raise ValueError("reference distribution must be a nonempty vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("reference distribution has non-finite entries")
        object.__setattr__(self, "values", values)

    def centile(self, q):
        """Empirical quantile with linear interpolation between order
        statistics.  Decisions near the threshold depend on this convention,
        hence it is pinned here."""
        if not 0.0 <= q <= 1.0:
            raise ValueError("centile level must lie in [0, 1]")
        return float(np.quantile(self.values, q))

    def save(self, path):
        path = Path(path)
        lines = [f"# reference log-evidence values; provenance: {self.provenance}"]
        lines.append("log_evidence")
        lines.extend(f"{v:.17g}" for v in self.values)
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, path):
        provenance = ""
        values = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                provenance = line.lstrip("# ").split("provenance:", 1)[-1].strip()
                continue
            if line == "log_evidence":
                continue
            values.append(float(line))
        return cls(np.asarray(values), provenance)


def misspecification_test(reference, new_log_evidence, significance=0.05):
    """One-sided lower-tail test: reject (out-of-dataset) iff the new
    observation's log evidence falls below the reference's
    ``significance``-centile.  Returns "in-dataset" or "rejected"."""
    if not 0.0 < significance < 1.0:
        raise ValueError("significance must lie in (0, 1)")
    critical = reference.centile(significance)
    return "rejected" if new_log_evidence < critical else "in-dataset"
