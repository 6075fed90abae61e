"""File formats: binary PGM for 8-bit image export, CSV for lossless
numeric exchange, and the observation sidecar JSON.

CSV values are written with %.17g so doubles round-trip exactly; every CSV
carries a one-line header.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forward_model import (
    ConvolutionOperator,
    IdentityOperator,
    MaskOperator,
    gaussian_blur_kernel,
)


def write_pgm(path, image, height, width, peak=1.0):
    """8-bit binary PGM (P5, maxval 255); values clamped to [0, peak] then scaled."""
    image = np.asarray(image, dtype=np.float64)
    if image.size != height * width:
        raise ValueError(f"image has {image.size} pixels, expected {height * width}")
    clamped = np.clip(image / peak, 0.0, 1.0)
    pixels = np.round(clamped * 255.0).astype(np.uint8).reshape(height, width)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return Path(path)


def read_pgm(path):
    """Read a binary P5 PGM; returns (flat image in [0, 1], height, width)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval -- whitespace separated, # comments
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.astype(np.float64) / maxval, height, width


def write_vector_csv(path, vector, header="value"):
    vector = np.asarray(vector, dtype=np.float64).ravel()
    lines = [header]
    lines.extend(f"{v:.17g}" for v in vector)
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_vector_csv(path):
    lines = Path(path).read_text().splitlines()
    return np.array([float(v) for v in lines[1:] if v.strip()])


def write_matrix_csv(path, matrix, header):
    matrix = np.asarray(matrix, dtype=np.float64)
    lines = [header]
    for row in np.atleast_2d(matrix):
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_matrix_csv(path):
    lines = Path(path).read_text().splitlines()
    rows = [
        [float(v) for v in line.split(",")]
        for line in lines[1:]
        if line.strip()
    ]
    return np.array(rows)


def read_image(path):
    """Read an image from .csv (flat doubles) or .pgm; returns a flat vector."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        image, _, _ = read_pgm(path)
        return image
    return read_vector_csv(path)


# ---------------------------------------------------------------------------
# Observation sidecar
# ---------------------------------------------------------------------------

def operator_to_spec(op):
    if isinstance(op, IdentityOperator):
        return {"kind": "identity", "dim": op.input_dim}
    if isinstance(op, MaskOperator):
        return {
            "kind": "mask",
            "dim": op.input_dim,
            "kept_indices": op.kept_indices.tolist(),
        }
    if isinstance(op, ConvolutionOperator):
        return {
            "kind": "convolution",
            "height": op.image_height,
            "width": op.image_width,
            "kernel": [row.tolist() for row in op.kernel],
        }
    raise ValueError(f"cannot serialize operator {type(op).__name__}")


def operator_from_spec(spec):
    kind = spec.get("kind")
    if kind == "identity":
        return IdentityOperator(spec["dim"])
    if kind == "mask":
        kept = np.zeros(spec["dim"], dtype=bool)
        kept[np.asarray(spec["kept_indices"], dtype=int)] = True
        return MaskOperator(kept)
    if kind == "convolution":
        if "kernel" in spec:
            kernel = np.asarray(spec["kernel"], dtype=np.float64)
        else:
            kernel = gaussian_blur_kernel(spec["kernel_size"], spec["kernel_bandwidth"])
        return ConvolutionOperator(kernel, spec["height"], spec["width"])
    raise ValueError(f"unknown operator kind {kind!r}")


def write_observation(out_dir, y, operator, sigma, seed, image_path=None):
    """Write y.csv plus the y.json sidecar; returns the two paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    y_path = write_vector_csv(out_dir / "y.csv", y, header="y")
    sidecar = {
        "operator": operator_to_spec(operator),
        "sigma": float(sigma),
        "seed": int(seed),
    }
    if image_path is not None:
        sidecar["image"] = str(image_path)
    meta_path = out_dir / "y.json"
    meta_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return y_path, meta_path


def read_observation(y_path, meta_path=None):
    """Read y.csv + sidecar; returns (y, operator, sigma)."""
    y_path = Path(y_path)
    if meta_path is None:
        meta_path = y_path.with_suffix(".json")
    meta = json.loads(Path(meta_path).read_text())
    y = read_vector_csv(y_path)
    return y, operator_from_spec(meta["operator"]), float(meta["sigma"])
