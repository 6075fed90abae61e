"""Deterministic decoders, encoder networks, weights files and Lipschitz bounds.

A decoder is a deterministic map from an m-dimensional latent space to a
d-dimensional image space.  Three variants are supported:

* ``AffineDecoder`` -- mu(z) = W z + b,
* ``MlpDecoder``    -- a fully connected relu network with identity output,
* ``ParabolaDecoder`` -- mu(z) = (z, z^2), a training-free 1-D manifold in
  the plane used by the demo and the test suite.

Networks are stored on disk as a JSON manifest plus a little-endian float32
blob (``<name>.manifest.json`` / ``<name>.bin``); offsets in the manifest are
counted in elements and are authoritative.  Weights are float32 at rest and
float64 in memory: all sampler arithmetic is double precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import as_vector

ACTIVATIONS = ("relu", "identity")

#: roles a weights manifest may declare
NETWORK_ROLES = ("decoder_mean", "encoder_mean", "encoder_logvar")


class WeightsFormatError(ValueError):
    """Raised when a weights manifest or blob is malformed."""


@dataclass(frozen=True)
class DenseLayer:
    """One fully connected layer: x -> act(W x + b).

    weight is (rows, cols) row-major, bias has length rows.
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"layer weight must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(
                f"bias length {b.shape} does not match weight rows {w.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer has non-finite entries")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def rows(self):
        return self.weight.shape[0]

    @property
    def cols(self):
        return self.weight.shape[1]

    def apply(self, x):
        y = self.weight @ x + self.bias
        if self.activation == "relu":
            np.maximum(y, 0.0, out=y)
        return y

    def apply_batch(self, X):
        Y = X @ self.weight.T + self.bias
        if self.activation == "relu":
            np.maximum(Y, 0.0, out=Y)
        return Y


@dataclass(frozen=True)
class MlpNetwork:
    """A feed-forward stack of DenseLayers with identity output activation."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network must have at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.cols != prev.rows:
                raise ValueError(
                    f"incompatible consecutive layers: {prev.rows} -> {nxt.cols}"
                )
        if layers[-1].activation != "identity":
            raise ValueError("final layer activation must be identity")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self):
        return self.layers[0].cols

    @property
    def output_dim(self):
        return self.layers[-1].rows

    def forward(self, x):
        x = as_vector(x, "network input", self.input_dim)
        for layer in self.layers:
            x = layer.apply(x)
        return x

    def forward_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        for layer in self.layers:
            X = layer.apply_batch(X)
        return X


class Decoder:
    """Common interface of all decoder variants."""

    latent_dim: int
    ambient_dim: int

    def decode(self, z):
        raise NotImplementedError

    def decode_batch(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return np.stack([self.decode(z) for z in Z])


class AffineDecoder(Decoder):
    """mu(z) = W z + b with W of shape (d, m)."""

    def __init__(self, weight, bias):
        w = np.asarray(weight, dtype=np.float64)
        b = np.asarray(bias, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("affine weight must be 2-D")
        if b.shape != (w.shape[0],):
            raise ValueError("affine bias length must equal weight rows")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("affine decoder has non-finite entries")
        self.weight = w
        self.bias = b
        self.latent_dim = w.shape[1]
        self.ambient_dim = w.shape[0]

    def decode(self, z):
        z = as_vector(z, "latent vector", self.latent_dim)
        return self.weight @ z + self.bias

    def decode_batch(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return Z @ self.weight.T + self.bias


class MlpDecoder(Decoder):
    """Network decoder; the output activation is identity (unconstrained reals)."""

    def __init__(self, network: MlpNetwork):
        self.network = network
        self.latent_dim = network.input_dim
        self.ambient_dim = network.output_dim
        zero_image = network.forward(np.zeros(self.latent_dim))
        if not np.all(np.isfinite(zero_image)):
            raise ValueError("decoder output at the zero latent is non-finite")

    def decode(self, z):
        return self.network.forward(z)

    def decode_batch(self, Z):
        return self.network.forward_batch(np.asarray(Z, dtype=np.float64))


class ParabolaDecoder(Decoder):
    """mu(z) = (z, z^2): a 1-D manifold in the plane, mirroring the curved
    ridge of the 2-D Rosenbrock demo.  Not globally Lipschitz."""

    latent_dim = 1
    ambient_dim = 2

    def decode(self, z):
        z = as_vector(z, "latent vector", 1)
        return np.array([z[0], z[0] * z[0]])

    def decode_batch(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return np.column_stack([Z[:, 0], Z[:, 0] * Z[:, 0]])


def decode(decoder, z):
    """Evaluate mu(z); function form of Decoder.decode."""
    return decoder.decode(z)


def encode_mean(encoder, x):
    """Deterministic encoder mean mu_phi(x).

    ``encoder`` may be an MlpNetwork, or a LoadedWeights whose manifest
    declared an encoder_mean role.
    """
    if isinstance(encoder, LoadedWeights):
        if encoder.encoder_mean is None:
            raise WeightsFormatError("manifest lacks encoder role 'encoder_mean'")
        encoder = encoder.encoder_mean
    return encoder.forward(x)


# ---------------------------------------------------------------------------
# Weights files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoadedWeights:
    """Result of load_weights: the decoder plus optional encoder networks."""

    decoder: Decoder
    encoder_mean: MlpNetwork | None
    encoder_logvar: MlpNetwork | None
    latent_dim: int
    ambient_dim: int


def _network_to_descriptors(network, offset):
    """Lay out a network's layers contiguously starting at ``offset``.

    Returns (descriptors, flat chunks, next free offset).
    """
    descriptors = []
    chunks = []
    for layer in network.layers:
        w_off = offset
        offset += layer.rows * layer.cols
        b_off = offset
        offset += layer.rows
        descriptors.append(
            {
                "rows": layer.rows,
                "cols": layer.cols,
                "activation": layer.activation,
                "weight_offset": w_off,
                "bias_offset": b_off,
            }
        )
        chunks.append(np.ascontiguousarray(layer.weight, dtype="<f4").ravel())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f4"))
    return descriptors, chunks, offset


def _decoder_as_network(decoder):
    if isinstance(decoder, MlpDecoder):
        return decoder.network
    if isinstance(decoder, AffineDecoder):
        layer = DenseLayer(decoder.weight, decoder.bias, "identity")
        return MlpNetwork((layer,))
    raise WeightsFormatError(
        f"decoder variant {type(decoder).__name__} cannot be serialized"
    )


def save_weights(stem, decoder, encoder_mean=None, encoder_logvar=None):
    """Write ``<stem>.manifest.json`` and ``<stem>.bin``.

    Weights are stored little-endian float32, matrices row-major, offsets
    counted in elements.  Returns (manifest_path, blob_path).
    """
    stem = Path(stem)
    networks = {"decoder_mean": _decoder_as_network(decoder)}
    if encoder_mean is not None:
        networks["encoder_mean"] = encoder_mean
    if encoder_logvar is not None:
        networks["encoder_logvar"] = encoder_logvar

    offset = 0
    manifest_networks = {}
    all_chunks = []
    for role, network in networks.items():
        descriptors, chunks, offset = _network_to_descriptors(network, offset)
        manifest_networks[role] = descriptors
        all_chunks.extend(chunks)

    dec = networks["decoder_mean"]
    manifest = {
        "dtype": "f32",
        "latent_dim": dec.input_dim,
        "ambient_dim": dec.output_dim,
        "networks": manifest_networks,
    }
    manifest_path = stem.with_suffix(".manifest.json")
    blob_path = stem.with_suffix(".bin")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    blob = np.concatenate(all_chunks) if all_chunks else np.empty(0, dtype="<f4")
    blob_path.write_bytes(blob.tobytes())
    return manifest_path, blob_path


def _read_chunk(blob, offset, count, what):
    if offset < 0 or offset + count > blob.shape[0]:
        raise WeightsFormatError(f"blob too short for {what}")
    return blob[offset : offset + count]


def _network_from_descriptors(descriptors, blob, role):
    layers = []
    for i, desc in enumerate(descriptors):
        try:
            rows, cols = int(desc["rows"]), int(desc["cols"])
            activation = desc["activation"]
            w_off, b_off = int(desc["weight_offset"]), int(desc["bias_offset"])
        except (KeyError, TypeError) as exc:
            raise WeightsFormatError(f"malformed layer descriptor in {role}") from exc
        if rows <= 0 or cols <= 0:
            raise WeightsFormatError(f"non-positive layer dims in {role}")
        w = _read_chunk(blob, w_off, rows * cols, f"{role} layer {i} weight")
        b = _read_chunk(blob, b_off, rows, f"{role} layer {i} bias")
        w64 = w.astype(np.float64).reshape(rows, cols)
        b64 = b.astype(np.float64)
        if not (np.all(np.isfinite(w64)) and np.all(np.isfinite(b64))):
            raise WeightsFormatError(f"NaN or Inf entries in {role} layer {i}")
        layers.append(DenseLayer(w64, b64, activation))
    return MlpNetwork(tuple(layers))


def _check_offsets_disjoint(manifest_networks, blob_len):
    spans = []
    for role, descriptors in manifest_networks.items():
        for desc in descriptors:
            rows, cols = int(desc["rows"]), int(desc["cols"])
            spans.append((int(desc["weight_offset"]), rows * cols, role))
            spans.append((int(desc["bias_offset"]), rows, role))
    spans.sort()
    end = 0
    for off, size, role in spans:
        if off < end:
            raise WeightsFormatError(f"overlapping offsets in manifest (role {role})")
        end = off + size
    if end > blob_len:
        raise WeightsFormatError("blob too short for declared offsets")


def load_weights(manifest_path, blob_path=None):
    """Load a weights file pair; inverse of save_weights (bit-exact round trip).

    A single identity-activation layer is returned as an AffineDecoder,
    anything deeper as an MlpDecoder.
    """
    manifest_path = Path(manifest_path)
    if blob_path is None:
        blob_path = manifest_path.with_suffix("").with_suffix(".bin")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise WeightsFormatError(f"malformed manifest: {exc}") from exc

    if manifest.get("dtype") != "f32":
        raise WeightsFormatError(
            f"unsupported dtype {manifest.get('dtype')!r} (only f32 is supported)"
        )
    networks = manifest.get("networks")
    if not isinstance(networks, dict) or "decoder_mean" not in networks:
        raise WeightsFormatError("manifest must declare a decoder_mean network")
    for role in networks:
        if role not in NETWORK_ROLES:
            raise WeightsFormatError(f"unknown network role {role!r}")

    blob = np.frombuffer(Path(blob_path).read_bytes(), dtype="<f4")
    _check_offsets_disjoint(networks, blob.shape[0])

    decoder_net = _network_from_descriptors(networks["decoder_mean"], blob, "decoder_mean")
    if len(decoder_net.layers) == 1 and decoder_net.layers[0].activation == "identity":
        layer = decoder_net.layers[0]
        decoder = AffineDecoder(layer.weight, layer.bias)
    else:
        decoder = MlpDecoder(decoder_net)

    latent_dim = int(manifest.get("latent_dim", decoder.latent_dim))
    ambient_dim = int(manifest.get("ambient_dim", decoder.ambient_dim))
    if (latent_dim, ambient_dim) != (decoder.latent_dim, decoder.ambient_dim):
        raise WeightsFormatError(
            "manifest latent_dim/ambient_dim disagree with decoder_mean layers"
        )

    encoder_mean = None
    encoder_logvar = None
    if "encoder_mean" in networks:
        encoder_mean = _network_from_descriptors(networks["encoder_mean"], blob, "encoder_mean")
    if "encoder_logvar" in networks:
        encoder_logvar = _network_from_descriptors(
            networks["encoder_logvar"], blob, "encoder_logvar"
        )
    return LoadedWeights(decoder, encoder_mean, encoder_logvar, latent_dim, ambient_dim)


# ---------------------------------------------------------------------------
# Lipschitz machinery
# ---------------------------------------------------------------------------

def spectral_norm(matrix, tol=1e-8, max_iter=50_000):
    """Largest singular value by power iteration on B = A^T A.

    Deterministic start vector.  Convergence is declared when the eigenpair
    residual ||B v - theta v|| drops below tol * theta: by the Bauer-Fike
    bound for symmetric matrices this puts an eigenvalue of B within
    tol * theta of theta, so the returned value carries a rigorous relative
    error of about tol/2 (a change-based stopping rule can stall far from
    the answer when the top spectral gap is small).  Raises RuntimeError if
    max_iter is exhausted first.
    """
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("spectral_norm expects a matrix")
    if A.size == 0:
        return 0.0
    rng = np.random.default_rng(0x5eed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        bv = A.T @ (A @ v)
        theta = float(v @ bv)  # Rayleigh quotient for sigma^2
        if theta == 0.0:
            return 0.0
        residual = np.linalg.norm(bv - theta * v)
        if residual <= tol * theta:
            return math.sqrt(theta)
        v = bv / np.linalg.norm(bv)
    raise RuntimeError(
        f"power iteration did not converge in {max_iter} iterations (tol={tol})"
    )


def lipschitz_upper_bound(decoder, tol=1e-8, max_iter=1000):
    """Finite upper bound on the decoder's Lipschitz constant.

    Affine: the spectral norm of W.  Mlp: the product over layers of each
    weight matrix's spectral norm (relu is 1-Lipschitz).  The parabola
    variant has no global bound and raises.
    """
    if isinstance(decoder, ParabolaDecoder):
        raise ValueError("parabola decoder is not globally Lipschitz")
    if isinstance(decoder, AffineDecoder):
        return spectral_norm(decoder.weight, tol=tol, max_iter=max_iter)
    if isinstance(decoder, MlpDecoder):
        bound = 1.0
        for layer in decoder.network.layers:
            bound *= spectral_norm(layer.weight, tol=tol, max_iter=max_iter)
        return float(bound)
    raise TypeError(f"unknown decoder variant {type(decoder).__name__}")


def builtin_decoder(name):
    """Decoders constructible by name (CLI convenience).

    ``parabola``       -- the coupled (z, z^2) manifold;
    ``identity:<d>``   -- affine identity in d dimensions (W=I, b=0).
    """
    if name == "parabola":
        return ParabolaDecoder()
    if name.startswith("identity:"):
        d = int(name.split(":", 1)[1])
        if d < 1:
            raise ValueError("identity decoder dimension must be >= 1")
        return AffineDecoder(np.eye(d), np.zeros(d))
    raise ValueError(f"unknown builtin decoder {name!r}")
