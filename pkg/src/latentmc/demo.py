"""Built-in demo targets: the bimodal escape-from-local-mode experiment and
the Rosenbrock manifold scatter.

The target is a highly multimodal 2-D potential: nearly all mass sits in a
deep well at (-1.2, 0); a decoy local mode lies near (-0.5, -0.25); and
concentric ripples around the dominant mode tile the rest of the plane with
local minima separated by barriers.  A single pCN chain started at (2, 0)
falls into the nearest local trap and cannot cross the barriers at T = 1,
while a {0, 1/2, 1} tempered ladder escapes: the T=0 chain roams the prior
freely, eventually lands inside the dominant well, and swap moves pass that
state down the ladder.  Exact depths, widths and ripple heights are this
implementation's choice, calibrated so both behaviours are reproducible.
"""

from __future__ import annotations

import math

import numpy as np

DOMINANT_CENTER = np.array([-1.2, 0.0])
DECOY_CENTER = np.array([-0.5, -0.25])
DEMO_INIT = np.array([2.0, 0.0])

_DECOY_DISTANCE = float(np.linalg.norm(DECOY_CENTER - DOMINANT_CENTER))

# dominant well: deep and wide enough that prior draws land in it
_DOM_DEPTH = 16.0
_DOM_SCALE = 0.35
# decoy well: deepens one ripple valley on the approach path
_DECOY_DEPTH = 6.0
_DECOY_SCALE = 0.12
# concentric ripples around the dominant mode; wavelength chosen so the
# decoy sits exactly on the first ripple valley
_RIPPLE_HEIGHT = 3.0
_RIPPLE_FREQ = 2.0 * math.pi / _DECOY_DISTANCE
_CEILING = _DOM_DEPTH + _DECOY_DEPTH  # keeps the potential >= 0


class BimodalDemoPotential:
    """Callable potential for the escape demo; latent_dim = 2."""

    latent_dim = 2

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        dz1 = z - DOMINANT_CENTER
        dz2 = z - DECOY_CENTER
        r1_sq = float(dz1 @ dz1)
        r2_sq = float(dz2 @ dz2)
        r1 = math.sqrt(r1_sq)
        value = (
            _CEILING
            + _RIPPLE_HEIGHT * (1.0 - math.cos(_RIPPLE_FREQ * r1))
            - _DOM_DEPTH * math.exp(-r1_sq / (2.0 * _DOM_SCALE**2))
            - _DECOY_DEPTH * math.exp(-r2_sq / (2.0 * _DECOY_SCALE**2))
        )
        return value

    def grid(self, lim=2.5, n=101):
        """Potential values on an n x n grid over [-lim, lim]^2 (plot data)."""
        axis = np.linspace(-lim, lim, n)
        values = np.empty((n, n))
        for i, z2 in enumerate(axis):
            for j, z1 in enumerate(axis):
                values[i, j] = self((z1, z2))
        return axis, values


def in_dominant_basin(samples, radius=0.35):
    """Boolean mask: which samples lie within ``radius`` of the dominant mode."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    return np.linalg.norm(samples - DOMINANT_CENTER, axis=1) < radius


def demo_config(seed, n_samples=1000, burn_in=500):
    """Sampler configuration of the escape demo.

    Fixed step size: with Robbins-Monro active the step transiently inflates
    during burn-in, and the resulting long jumps leap the ripple barriers,
    defeating the point of the comparison.  The T=0 chain instead explores
    through the i.i.d.-prior mode.
    """
    from .sampler import PcnConfig

    return PcnConfig(
        n_samples=n_samples,
        burn_in=burn_in,
        beta0=0.1,
        rm_c=0.0,
        swap_every=5,
        iid_t0=True,
        master_seed=seed,
    )


def run_escape_demo(seed, tempered=True, n_samples=1000, burn_in=500):
    """Run the escape experiment from the init point (2, 0).

    tempered=True uses the {0, 1/2, 1} ladder; False runs a single T = 1
    chain, which stays trapped away from the dominant mode.
    """
    from .sampler import TemperatureLadder, run_sampler

    ladder = (
        TemperatureLadder((0.0, 0.5, 1.0)) if tempered else TemperatureLadder.single()
    )
    config = demo_config(seed, n_samples=n_samples, burn_in=burn_in)
    potential = BimodalDemoPotential()
    return run_sampler(potential, ladder, config, initial_states=DEMO_INIT)


def rosenbrock_log_density(x1, x2):
    """Log density of the 2-D Rosenbrock benchmark,
    log p = -8 (x2 - x1^2)^2 - (1 - x1)^2 + const.

    Mass concentrates on the narrow curved ridge x2 = x1^2.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    return -8.0 * (x2 - x1**2) ** 2 - (1.0 - x1) ** 2


def parabola_pushforward_samples(n, rng):
    """n samples of mu(z) = (z, z^2) under z ~ N(0, 1): the deterministic
    stand-in for a decoder trained on Rosenbrock data."""
    z = rng.standard_normal(n)
    return np.column_stack([z, z * z])


def rosenbrock_density_grid(x1_lim=(-2.0, 2.0), x2_lim=(-1.0, 4.0), n=81):
    """Grid evaluation of the (unnormalized) Rosenbrock density for plotting."""
    x1 = np.linspace(*x1_lim, n)
    x2 = np.linspace(*x2_lim, n)
    X1, X2 = np.meshgrid(x1, x2)
    density = np.exp(rosenbrock_log_density(X1, X2))
    return x1, x2, density
