"""Parallel-tempered preconditioned Crank-Nicolson sampling.

Each chain i targets the tempered law  exp(-T_i Phi(z)) N(z; 0, I_m)  for a
ladder 0 <= T_0 < ... < T_{k-1} = 1.  Moves are pCN proposals

    P = sqrt(1 - beta^2) z + beta xi,     xi ~ N(0, I_m),

accepted with probability min(1, exp(T [Phi(z) - Phi(P)])), i.e. accepting on
potential decrease.  Every ``swap_every`` iterations a state exchange between
one adjacent pair is proposed and accepted with the replica-exchange rule
min(1, exp((T_{j+1} - T_j) (Phi(z_{j+1}) - Phi(z_j)))); the proposed pair
cycles through the ladder.  Step sizes adapt per chain by a Robbins-Monro
recursion on logit(beta) during burn-in only and are frozen afterwards.

Reproducibility contract: every chain owns a private RNG stream derived from
(master_seed, chain index) and consumes draws in a fixed order (m normals,
then one uniform, per iteration; one uniform per swap proposal from a
dedicated stream), so a run is a pure function of (config, potential, ladder)
regardless of how many threads advance the chains.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_unit_open

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TemperatureLadder:
    """Sorted chain temperatures with T_last = 1 exactly."""

    temps: tuple

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temps)
        if not temps:
            raise ValueError("ladder must contain at least one temperature")
        if temps[0] < 0.0:
            raise ValueError("temperatures must be nonnegative")
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ValueError("temperatures must be strictly increasing")
        if temps[-1] != 1.0:
            raise ValueError("last temperature must be exactly 1")
        object.__setattr__(self, "temps", temps)

    def __len__(self):
        return len(self.temps)

    def __iter__(self):
        return iter(self.temps)

    def as_array(self):
        return np.asarray(self.temps, dtype=np.float64)

    @classmethod
    def linear(cls, k):
        """Evenly spaced ladder {0, 1/(k-1), ..., 1}; {0, 1/2, 1} for k=3."""
        if k < 2:
            raise ValueError("linear ladder needs k >= 2")
        return cls(tuple(i / (k - 1) for i in range(k)))

    @classmethod
    def power(cls, k, exponent=5.0):
        """T_i = (i/(k-1))^exponent: concentrates temperatures near 0, where
        the thermodynamic-integration integrand varies fastest."""
        if k < 2:
            raise ValueError("power ladder needs k >= 2")
        return cls(tuple((i / (k - 1)) ** exponent for i in range(k)))

    @classmethod
    def single(cls):
        """Untempered single chain at T = 1."""
        return cls((1.0,))

    @classmethod
    def from_spec(cls, spec, k):
        """Parse a CLI ladder spec: linear | power5 | explicit:t0,t1,..."""
        if spec == "linear":
            return cls.linear(k) if k >= 2 else cls.single()
        if spec == "power5":
            return cls.power(k, 5.0) if k >= 2 else cls.single()
        if spec.startswith("explicit:"):
            values = tuple(float(v) for v in spec.split(":", 1)[1].split(","))
            return cls(values)
        raise ValueError(f"unknown ladder spec {spec!r}")


@dataclass(frozen=True)
class PcnConfig:
    """Sampler configuration.

    Defaults follow the reference experiment setup: initial step size 0.1,
    target acceptance 0.25, burn-in 2e4, swap proposal every 10 iterations.
    ``rm_c`` scales the Robbins-Monro gain c_n = rm_c / n; 0 disables
    adaptation.  ``iid_t0`` replaces the T=0 chain's pCN kernel with exact
    i.i.d. prior draws (statistically equivalent, lower variance).
    """

    n_samples: int
    beta0: float = 0.1
    target_accept: float = 0.25
    rm_c: float = 1.0
    swap_every: int = 10
    burn_in: int = 20_000
    master_seed: int = 0
    n_threads: int = 1
    iid_t0: bool = False

    def __post_init__(self):
        check_unit_open(self.beta0, "beta0")
        check_unit_open(self.target_accept, "target_accept")
        if self.rm_c < 0:
            raise ValueError("rm_c must be nonnegative")
        check_positive(self.swap_every, "swap_every")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.n_samples < 0:
            raise ValueError("n_samples must be nonnegative")
        if self.n_threads < 1:
            raise ValueError("n_threads must be >= 1")


@dataclass
class ChainEnsemble:
    """Mutable state of k tempered chains.

    Swap moves exchange states (and their cached potentials) between slots;
    per-slot step sizes and RNG streams never move.
    """

    states: np.ndarray          # (k, m)
    potentials: np.ndarray      # (k,)
    temps: np.ndarray           # (k,)
    betas: np.ndarray           # (k,)
    rngs: list
    swap_rng: np.random.Generator
    accept_counts: np.ndarray   # (k,)
    proposal_counts: np.ndarray  # (k,)
    swap_pointer: int = 0

    @classmethod
    def initialize(cls, pf, ladder, config, initial_states=None):
        k = len(ladder)
        m = pf.latent_dim
        if initial_states is None:
            states = np.zeros((k, m))
        else:
            states = np.array(initial_states, dtype=np.float64)
            if states.shape == (m,):
                states = np.tile(states, (k, 1))
            if states.shape != (k, m):
                raise ValueError(f"initial states must have shape ({k}, {m})")
        seeds = np.random.SeedSequence(config.master_seed).spawn(k + 1)
        rngs = [np.random.default_rng(s) for s in seeds[:k]]
        swap_rng = np.random.default_rng(seeds[k])
        potentials = np.array([pf(z) for z in states])
        return cls(
            states=states,
            potentials=potentials,
            temps=ladder.as_array(),
            betas=np.full(k, config.beta0),
            rngs=rngs,
            swap_rng=swap_rng,
            accept_counts=np.zeros(k, dtype=np.int64),
            proposal_counts=np.zeros(k, dtype=np.int64),
        )


@dataclass
class TraceStore:
    """Post-burn-in samples and potentials for every temperature, with
    acceptance and swap summaries."""

    temperatures: np.ndarray          # (k,)
    samples: np.ndarray               # (k, n, m)
    potentials: np.ndarray            # (k, n)
    accept_rate: np.ndarray           # (k,) post burn-in
    accept_rate_burnin: np.ndarray    # (k,)
    swap_attempts: np.ndarray         # (k-1,) per adjacent pair
    swap_accepts: np.ndarray          # (k-1,)
    betas_final: np.ndarray           # (k,)
    betas_at_burnin_end: np.ndarray   # (k,)
    burn_in: int
    master_seed: int
    nonfinite_rejections: int = 0

    @property
    def n_chains(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def latent_dim(self):
        return self.samples.shape[2]

    def chain(self, i):
        """(samples, potentials) of chain i, coldest first."""
        return self.samples[i], self.potentials[i]

    @property
    def posterior_samples(self):
        """Samples of the T = 1 chain."""
        return self.samples[-1]

    @property
    def posterior_potentials(self):
        return self.potentials[-1]

    def swap_rates(self):
        with np.errstate(invalid="ignore"):
            return np.where(
                self.swap_attempts > 0, self.swap_accepts / self.swap_attempts, np.nan
            )

    def summary(self):
        return {
            "temperatures": self.temperatures.tolist(),
            "n_samples": int(self.n_samples),
            "burn_in": int(self.burn_in),
            "master_seed": int(self.master_seed),
            "acceptance_rates": self.accept_rate.tolist(),
            "acceptance_rates_burnin": self.accept_rate_burnin.tolist(),
            "swap_attempts": self.swap_attempts.tolist(),
            "swap_accepts": self.swap_accepts.tolist(),
            "betas_final": self.betas_final.tolist(),
            "betas_at_burnin_end": self.betas_at_burnin_end.tolist(),
            "nonfinite_rejections": int(self.nonfinite_rejections),
            "acceptance_convention": "accept with min(1, exp(T*(phi_current - phi_proposal)))",
        }


def robbins_monro_update(beta_n, observed_alpha, n, config):
    """One step of the logit-domain Robbins-Monro step-size recursion:
    delta' = logit(beta) + (c/n)(alpha - a), beta' = sigmoid(delta')."""
    if n < 1:
        raise ValueError("iteration index n must be >= 1")
    if not 0.0 < beta_n < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    delta = math.log(beta_n / (1.0 - beta_n))
    delta += (config.rm_c / n) * (observed_alpha - config.target_accept)
    return 1.0 / (1.0 + math.exp(-delta))


def _transition(z, phi, beta, sq_beta, pf, temp, rng, m):
    """One pCN proposal/accept.  Returns (z, phi, accepted, alpha).

    Consumes exactly m normals and one uniform regardless of the outcome, so
    traces are reproducible across refactors.  A non-finite potential at the
    proposal counts as a rejection.
    """
    xi = rng.standard_normal(m)
    prop = sq_beta * z + beta * xi
    try:
        phi_prop = pf(prop)
    except FloatingPointError:
        phi_prop = math.inf
    u = rng.random()
    if not math.isfinite(phi_prop):
        logger.warning("non-finite potential at proposal; treating as rejection")
        return z, phi, False, 0.0, True
    log_alpha = temp * (phi - phi_prop)
    if log_alpha >= 0.0:
        return prop, phi_prop, True, 1.0, False
    alpha = math.exp(log_alpha)
    if u < alpha:
        return prop, phi_prop, True, alpha, False
    return z, phi, False, alpha, False


def pcn_step(state, beta, pf, temperature, rng):
    """Single pCN Markov step at inverse-tempering T; returns (state, accepted).

    beta = 1 is allowed as an independence-sampler special case.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    if not 0.0 <= temperature <= 1.0:
        raise ValueError("temperature must lie in [0, 1]")
    z = np.asarray(state, dtype=np.float64)
    phi = pf(z)
    sq_beta = math.sqrt(max(0.0, 1.0 - beta * beta))
    new_z, _, accepted, _, _ = _transition(
        z, phi, beta, sq_beta, pf, temperature, rng, z.shape[0]
    )
    return new_z, accepted


def swap_step(ensemble, pair, pf=None, rng=None):
    """Propose exchanging the states of an adjacent pair of chains.

    Acceptance uses the replica-exchange rule
    min(1, exp((T_{i+1} - T_i)(Phi(z_{i+1}) - Phi(z_i)))), which satisfies
    detailed balance for the product of tempered targets.  On acceptance the
    states (and cached potentials) swap; step sizes and RNG streams do not.
    Returns (ensemble, accepted).
    """
    i, j = pair
    if j != i + 1 or not 0 <= i < len(ensemble.temps) - 1:
        raise ValueError(f"swap pair must be adjacent within the ladder, got {pair}")
    if rng is None:
        rng = ensemble.swap_rng
    if pf is not None and not np.all(np.isfinite(ensemble.potentials[[i, j]])):
        ensemble.potentials[i] = pf(ensemble.states[i])
        ensemble.potentials[j] = pf(ensemble.states[j])
    log_alpha = (ensemble.temps[j] - ensemble.temps[i]) * (
        ensemble.potentials[j] - ensemble.potentials[i]
    )
    u = rng.random()
    accepted = log_alpha >= 0.0 or u < math.exp(log_alpha)
    if accepted:
        ensemble.states[[i, j]] = ensemble.states[[j, i]]
        ensemble.potentials[[i, j]] = ensemble.potentials[[j, i]]
    return ensemble, accepted


def _advance_chain(slot, ens, pf, config, n_from, n_to, samples, potentials,
                   accept_burnin, accept_sampling, nonfinite_counts,
                   betas_at_burnin_end):
    """Advance one chain through global iterations n_from..n_to inclusive."""
    z = ens.states[slot]
    phi = float(ens.potentials[slot])
    beta = float(ens.betas[slot])
    temp = float(ens.temps[slot])
    rng = ens.rngs[slot]
    m = z.shape[0]
    burn_in = config.burn_in
    adapt = config.rm_c > 0.0
    iid = config.iid_t0 and temp == 0.0
    sq_beta = math.sqrt(max(0.0, 1.0 - beta * beta))

    for n in range(n_from, n_to + 1):
        if iid:
            z = rng.standard_normal(m)
            phi = pf(z)
            accepted, alpha = True, 1.0
        else:
            z, phi, accepted, alpha, nonfinite = _transition(
                z, phi, beta, sq_beta, pf, temp, rng, m
            )
            if nonfinite:
                nonfinite_counts[slot] += 1
        if n <= burn_in:
            accept_burnin[slot] += accepted
            if adapt and not iid:
                beta = robbins_monro_update(beta, alpha, n, config)
                sq_beta = math.sqrt(max(0.0, 1.0 - beta * beta))
            if n == burn_in:
                betas_at_burnin_end[slot] = beta
        else:
            accept_sampling[slot] += accepted
            idx = n - burn_in - 1
            samples[slot, idx] = z
            potentials[slot, idx] = phi

    ens.states[slot] = z
    ens.potentials[slot] = phi
    ens.betas[slot] = beta


def run_sampler(pf, ladder, config, initial_states=None):
    """Run the full parallel-tempered pCN sampler; returns a TraceStore.

    ``pf`` is any callable z -> Phi(z) with a ``latent_dim`` attribute
    (PotentialFn in the usual case).  Chains initialize at zero unless
    ``initial_states`` is given.  Output is bit-reproducible given
    config.master_seed, with 1 thread or k threads.
    """
    if not isinstance(ladder, TemperatureLadder):
        ladder = TemperatureLadder(tuple(ladder))
    k = len(ladder)
    m = pf.latent_dim
    ens = ChainEnsemble.initialize(pf, ladder, config, initial_states)

    total = config.burn_in + config.n_samples
    samples = np.empty((k, config.n_samples, m))
    potentials = np.empty((k, config.n_samples))
    accept_burnin = np.zeros(k, dtype=np.int64)
    accept_sampling = np.zeros(k, dtype=np.int64)
    nonfinite_counts = np.zeros(k, dtype=np.int64)
    betas_at_burnin_end = np.array(ens.betas, copy=True)
    swap_attempts = np.zeros(max(k - 1, 0), dtype=np.int64)
    swap_accepts = np.zeros(max(k - 1, 0), dtype=np.int64)

    pool = ThreadPoolExecutor(config.n_threads) if config.n_threads > 1 else None
    try:
        n = 0
        while n < total:
            seg_end = min(n + config.swap_every, total) if k >= 2 else total
            args = [
                (slot, ens, pf, config, n + 1, seg_end, samples, potentials,
                 accept_burnin, accept_sampling, nonfinite_counts,
                 betas_at_burnin_end)
                for slot in range(k)
            ]
            if pool is not None:
                list(pool.map(lambda a: _advance_chain(*a), args))
            else:
                for a in args:
                    _advance_chain(*a)
            n = seg_end
            # synchronization barrier: swap proposal for the cycling pair
            if k >= 2 and n % config.swap_every == 0 and n <= total:
                j = ens.swap_pointer
                _, accepted = swap_step(ens, (j, j + 1))
                swap_attempts[j] += 1
                swap_accepts[j] += accepted
                if accepted and n > config.burn_in:
                    idx = n - config.burn_in - 1
                    samples[[j, j + 1], idx] = samples[[j + 1, j], idx]
                    potentials[[j, j + 1], idx] = potentials[[j + 1, j], idx]
                ens.swap_pointer = (j + 1) % (k - 1)
    finally:
        if pool is not None:
            pool.shutdown()

    with np.errstate(invalid="ignore"):
        rate_b = accept_burnin / config.burn_in if config.burn_in else np.zeros(k)
        rate_s = (
            accept_sampling / config.n_samples if config.n_samples else np.zeros(k)
        )
    return TraceStore(
        temperatures=ladder.as_array(),
        samples=samples,
        potentials=potentials,
        accept_rate=rate_s,
        accept_rate_burnin=rate_b,
        swap_attempts=swap_attempts,
        swap_accepts=swap_accepts,
        betas_final=np.array(ens.betas, copy=True),
        betas_at_burnin_end=betas_at_burnin_end,
        burn_in=config.burn_in,
        master_seed=config.master_seed,
        nonfinite_rejections=int(nonfinite_counts.sum()),
    )
