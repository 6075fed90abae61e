"""Command-line entry point.

Subcommands cover the full experiment pipeline: observation simulation,
posterior sampling, point estimation, evidence, coverage, the latent
dimension check, model checks, and the escape demo.  Every run writes a
run_manifest.json into --out capturing the command, all parameters, the
package version and the produced files; outputs land only under --out.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, demo, evidence, fileio
from .forward_model import (
    ConvolutionOperator,
    IdentityOperator,
    MaskOperator,
    Observation,
    PotentialFn,
    check_wellposedness,
    gaussian_blur_kernel,
    psnr,
    random_mask,
)
from .generator import (
    builtin_decoder,
    encode_mean,
    lipschitz_upper_bound,
    load_weights,
)
from .sampler import PcnConfig, TemperatureLadder, run_sampler


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        raise UsageError(message)


def derive_seed(master_seed, index):
    """Stable per-item seed: hash of (master_seed, index) via SeedSequence."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_out(p):
    p.add_argument(
        "--out",
        default=os.environ.get("LATENTMC_OUT"),
        help="output directory (default: $LATENTMC_OUT)",
    )
    return p


def _add_decoder_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--decoder", help="builtin decoder: parabola | identity:<d>")
    g.add_argument("--weights", help="weights file stem (<stem>.manifest.json + .bin)")
    return p


def _add_operator_flags(p):
    p.add_argument("--op", choices=["denoise", "inpaint", "deblur"], default="denoise")
    p.add_argument("--sigma", type=float, default=0.25, help="noise std deviation")
    p.add_argument("--keep-fraction", type=float, default=0.25,
                   help="inpainting: fraction of observed pixels")
    p.add_argument("--kernel-size", type=int, default=6)
    p.add_argument("--kernel-bandwidth", type=float, default=2.0)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    return p


def _add_sampler_flags(p, samples_default=20_000, burn_in_default=2_000,
                       chains_default=3, ladder_default="linear"):
    p.add_argument("--chains", type=int, default=chains_default)
    p.add_argument("--ladder", default=ladder_default,
                   help="linear | power5 | explicit:t0,t1,...")
    p.add_argument("--beta0", type=float, default=0.1)
    p.add_argument("--target-accept", type=float, default=0.25)
    p.add_argument("--rm-c", type=float, default=1.0)
    p.add_argument("--swap-every", type=int, default=10)
    p.add_argument("--burn-in", type=int, default=burn_in_default)
    p.add_argument("--samples", type=int, default=samples_default)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--iid-t0", action="store_true",
                   help="draw the T=0 chain i.i.d. from the prior")
    return p


def _image_dims(args, d):
    if args.height and args.width:
        return args.height, args.width
    side = math.isqrt(d)
    if side * side == d:
        return side, side
    return None


def _build_operator(args, d):
    if args.op == "denoise":
        return IdentityOperator(d)
    if args.op == "inpaint":
        kept = random_mask(d, args.keep_fraction, seed=derive_seed(args.seed, 0xA5))
        return MaskOperator(kept)
    if args.op == "deblur":
        dims = _image_dims(args, d)
        if dims is None:
            raise UsageError(
                "deblur needs --height/--width (image is not square)"
            )
        kernel = gaussian_blur_kernel(args.kernel_size, args.kernel_bandwidth)
        return ConvolutionOperator(kernel, *dims)
    raise UsageError(f"unknown operator {args.op}")


def _load_decoder(args, need_encoder=False):
    """Returns (decoder, encoder_mean or None, encoder_logvar or None)."""
    if args.weights:
        loaded = load_weights(Path(args.weights).with_suffix(".manifest.json"))
        return loaded.decoder, loaded.encoder_mean, loaded.encoder_logvar
    decoder = builtin_decoder(args.decoder)
    if args.decoder.startswith("identity:"):
        # the exact linear-Gaussian model encodes with the identity
        return decoder, "identity", None
    if need_encoder:
        raise UsageError(f"builtin decoder {args.decoder!r} has no encoder")
    return decoder, None, None


def _config_from_args(args):
    return PcnConfig(
        n_samples=args.samples,
        beta0=args.beta0,
        target_accept=args.target_accept,
        rm_c=args.rm_c,
        swap_every=args.swap_every,
        burn_in=args.burn_in,
        master_seed=args.seed,
        n_threads=args.threads,
        iid_t0=args.iid_t0,
    )


def _require_exists(*paths):
    """Referenced input paths must exist at parse time (usage error if not)."""
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"input path does not exist: {p}")


def _input_paths(args):
    candidates = []
    for name in ("image", "y", "obs_meta", "trace", "truth", "latents",
                 "encodings", "dataset", "images", "reference"):
        candidates.append(getattr(args, name, None))
    if getattr(args, "weights", None):
        candidates.append(Path(args.weights).with_suffix(".manifest.json"))
    return [c for c in candidates if c is not None]


def _out_dir(args):
    if not args.out:
        raise UsageError("--out is required (or set $LATENTMC_OUT)")
    _require_exists(*_input_paths(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, command, args, extra=None, outputs=(), wall_time=None):
    manifest = {
        "command": command,
        "version": f"latentmc {__version__}",
        "parameters": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func",)
        },
        "outputs": sorted(str(Path(p).name) for p in outputs),
        "acceptance_convention":
            "accept with min(1, exp(T*(phi_current - phi_proposal)))",
    }
    if extra:
        manifest.update(extra)
    if wall_time is not None:
        manifest["wall_time_seconds"] = wall_time
    path = out / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_traces(out, trace):
    """One CSV per temperature: iter, z_1..z_m, potential."""
    paths = []
    m = trace.latent_dim
    header = "iter," + ",".join(f"z_{j + 1}" for j in range(m)) + ",potential"
    for i in range(trace.n_chains):
        rows = np.column_stack(
            [
                np.arange(trace.n_samples, dtype=np.float64),
                trace.samples[i],
                trace.potentials[i],
            ]
        )
        path = fileio.write_matrix_csv(out / f"trace_{i:02d}.csv", rows, header)
        paths.append(path)
    return paths


def _read_trace_csv(path):
    rows = fileio.read_matrix_csv(path)
    if rows.size == 0:
        raise ValueError(f"{path}: empty trace")
    return rows[:, 1:-1], rows[:, -1]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    out = _out_dir(args)
    x = fileio.read_image(args.image)
    operator = _build_operator(args, x.shape[0])
    rng = np.random.default_rng(derive_seed(args.seed, 0x0B5))
    y = operator.apply(x) + args.sigma * rng.standard_normal(operator.output_dim)
    y_path, meta_path = fileio.write_observation(
        out, y, operator, args.sigma, args.seed, image_path=args.image
    )
    _write_manifest(out, "simulate", args, outputs=[y_path, meta_path])
    return 0


def cmd_sample(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    decoder, _, _ = _load_decoder(args)
    y, operator, sigma = fileio.read_observation(args.y, args.obs_meta)
    if operator.input_dim != decoder.ambient_dim:
        raise UsageError(
            f"operator input dim {operator.input_dim} does not match decoder "
            f"ambient dim {decoder.ambient_dim}"
        )
    pf = PotentialFn(decoder, Observation(y=y, sigma=sigma, operator=operator))
    ladder = TemperatureLadder.from_spec(args.ladder, args.chains)
    trace = run_sampler(pf, ladder, _config_from_args(args))
    paths = _write_traces(out, trace)
    wall = time.perf_counter() - t0
    _write_manifest(
        out, "sample", args, extra={"run": trace.summary()}, outputs=paths,
        wall_time=wall,
    )
    return 0


def cmd_estimate(args):
    out = _out_dir(args)
    decoder, _, _ = _load_decoder(args)
    trace_dir = Path(args.trace)
    trace_files = sorted(trace_dir.glob("trace_*.csv"))
    if not trace_files:
        raise UsageError(f"no trace_*.csv files under {trace_dir}")
    samples, potentials = _read_trace_csv(trace_files[-1])  # T = 1 chain
    summary = analysis.mmse_estimate(samples, decoder)

    outputs = [
        fileio.write_vector_csv(out / "mmse.csv", summary.mmse_image, header="mmse"),
        fileio.write_vector_csv(
            out / "pixel_variance.csv", summary.pixel_variances, header="variance"
        ),
    ]
    dims = _image_dims(args, decoder.ambient_dim)
    if dims is not None:
        outputs.append(fileio.write_pgm(out / "mmse.pgm", summary.mmse_image, *dims))
        outputs.append(
            fileio.write_pgm(
                out / "pixel_variance.pgm",
                summary.pixel_variances / max(summary.pixel_variances.max(), 1e-300),
                *dims,
            )
        )

    extra = {"n_used": summary.n_used}
    if args.truth:
        truth = fileio.read_image(args.truth)
        extra["psnr_mmse_db"] = psnr(summary.mmse_image, truth)
    if args.pca:
        pca = analysis.posterior_pca(samples)
        outputs += [
            fileio.write_vector_csv(
                out / "pca_eigenvalues.csv", pca.eigenvalues, header="eigenvalue"
            ),
            fileio.write_matrix_csv(
                out / "pca_components.csv",
                pca.components,
                ",".join(f"component_{j + 1}" for j in range(pca.components.shape[1])),
            ),
            fileio.write_matrix_csv(
                out / "pca_projections.csv", pca.projected_samples, "proj_1,proj_2"
            ),
        ]
        # decoded thumbnails on a grid of the two leading directions
        thumbs = out / "pca_grid"
        thumbs.mkdir(exist_ok=True)
        sd = np.sqrt(np.maximum(pca.eigenvalues[:2], 0.0))
        if dims is not None and sd[0] > 0:
            for i, a in enumerate(np.linspace(-2, 2, 5)):
                for j, b in enumerate(np.linspace(-2, 2, 5)):
                    z = (
                        pca.mean
                        + a * sd[0] * pca.components[:, 0]
                        + (b * sd[1] * pca.components[:, 1] if pca.components.shape[1] > 1 else 0.0)
                    )
                    outputs.append(
                        fileio.write_pgm(
                            thumbs / f"grid_{i}{j}.pgm", decoder.decode(z), *dims
                        )
                    )
    _write_manifest(out, "estimate", args, extra=extra, outputs=outputs)
    print(json.dumps(extra, indent=2))
    return 0


def cmd_evidence(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    decoder, _, _ = _load_decoder(args)
    y, operator, sigma = fileio.read_observation(args.y, args.obs_meta)
    pf = PotentialFn(decoder, Observation(y=y, sigma=sigma, operator=operator))
    ladder = TemperatureLadder.from_spec(args.ladder, args.chains)
    trace = run_sampler(pf, ladder, _config_from_args(args))
    means, ses = evidence.per_temperature_loglik_means(trace, pf)
    estimate = evidence.thermodynamic_integration(means, ladder, ses)

    report_rows = np.column_stack([ladder.as_array(), means, ses])
    outputs = [
        fileio.write_matrix_csv(
            out / "evidence_report.csv", report_rows, "T,mean_loglik,se"
        )
    ]
    summary = estimate.as_dict()
    summary["n_per_temp"] = trace.n_samples
    if args.reference:
        ref = evidence.ReferenceDistribution.load(args.reference)
        summary["misspecification_decision"] = evidence.misspecification_test(
            ref, estimate.log_evidence, args.significance
        )
        summary["reference_centile"] = ref.centile(args.significance)
    path = out / "evidence.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs.append(path)
    _write_manifest(
        out, "evidence", args, extra={"log_evidence": estimate.log_evidence},
        outputs=outputs, wall_time=time.perf_counter() - t0,
    )
    print(json.dumps({"log_evidence": estimate.log_evidence,
                      "se": estimate.log_evidence_se}, indent=2))
    return 0


def cmd_coverage(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    decoder, encoder_mean_net, encoder_logvar_net = _load_decoder(
        args, need_encoder=args.synthetic == 0
    )
    if args.synthetic > 0:
        rng = np.random.default_rng(derive_seed(args.seed, 0x57))
        latents = rng.standard_normal((args.synthetic, decoder.latent_dim))
        images = [decoder.decode(z) for z in latents]
    else:
        image_files = sorted(Path(args.images).glob("*.csv")) + sorted(
            Path(args.images).glob("*.pgm")
        )
        if not image_files:
            raise UsageError(f"no .csv or .pgm images under {args.images}")
        images = [fileio.read_image(p) for p in image_files]

    d = images[0].shape[0]
    operator = _build_operator(args, d)
    sigma = args.sigma

    if encoder_mean_net == "identity":
        def encode_fn(x, rng):
            return x
    elif encoder_mean_net is None:
        raise UsageError("coverage requires an encoder (trained weights)")
    elif args.stochastic_encode:
        if encoder_logvar_net is None:
            raise UsageError("--stochastic-encode requires an encoder_logvar network")

        def encode_fn(x, rng):
            mean = encoder_mean_net.forward(x)
            logvar = encoder_logvar_net.forward(x)
            return mean + np.exp(0.5 * logvar) * rng.standard_normal(mean.shape[0])
    else:
        def encode_fn(x, rng):
            return encode_mean(encoder_mean_net, x)

    def pf_factory(x_true, rng):
        y = operator.apply(x_true) + sigma * rng.standard_normal(operator.output_dim)
        return PotentialFn(decoder, Observation(y=y, sigma=sigma, operator=operator))

    levels = [float(v) for v in args.levels.split(",")]
    ladder = TemperatureLadder.from_spec(args.ladder, args.chains)
    result = analysis.coverage_experiment(
        images, encode_fn, pf_factory, ladder, _config_from_args(args), levels,
        master_seed=args.seed,
    )
    rows = np.column_stack(
        [
            result.nominal_levels,
            result.empirical_coverage,
            np.full(len(levels), result.n_replicates, dtype=np.float64),
        ]
    )
    outputs = [fileio.write_matrix_csv(out / "coverage.csv", rows, "level,empirical,n")]
    _write_manifest(
        out, "coverage", args,
        extra={
            "empirical_coverage": result.empirical_coverage.tolist(),
            "n_samples_per_replicate": result.n_samples_per_replicate,
        },
        outputs=outputs, wall_time=time.perf_counter() - t0,
    )
    print(json.dumps({"levels": levels,
                      "empirical": result.empirical_coverage.tolist()}, indent=2))
    return 0


def cmd_dim_check(args):
    out = _out_dir(args)
    rows = fileio.read_matrix_csv(args.encodings)
    header = Path(args.encodings).read_text().splitlines()[0].split(",")
    mu_cols = [i for i, name in enumerate(header) if name.startswith("mu_")]
    means = rows[:, mu_cols] if mu_cols else rows
    trace_value, per_dim = analysis.latent_dim_diagnostic(means)
    m = means.shape[1]
    result = {
        "latent_dim": m,
        "covariance_trace": trace_value,
        "per_dim_variances": per_dim.tolist(),
        "redundancy_flagged": bool(trace_value < m),
    }
    path = out / "dim_check.json"
    path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    outputs = [
        path,
        fileio.write_vector_csv(out / "per_dim_variance.csv", per_dim, "variance"),
    ]
    _write_manifest(out, "dim-check", args, extra=result, outputs=outputs)
    print(json.dumps(result, indent=2))
    return 0


def cmd_rosenbrock_demo(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    single = demo.run_escape_demo(args.seed, tempered=False,
                                  n_samples=args.samples, burn_in=args.burn_in)
    tempered = demo.run_escape_demo(args.seed, tempered=True,
                                    n_samples=args.samples, burn_in=args.burn_in)
    outputs = []
    header = "iter,z_1,z_2,potential"
    rows = np.column_stack(
        [np.arange(single.n_samples, dtype=np.float64),
         single.posterior_samples, single.posterior_potentials]
    )
    outputs.append(fileio.write_matrix_csv(out / "trace_single.csv", rows, header))
    for i in range(tempered.n_chains):
        rows = np.column_stack(
            [np.arange(tempered.n_samples, dtype=np.float64),
             tempered.samples[i], tempered.potentials[i]]
        )
        outputs.append(
            fileio.write_matrix_csv(out / f"trace_pt_{i:02d}.csv", rows, header)
        )

    rng = np.random.default_rng(derive_seed(args.seed, 0x6E))
    scatter = demo.parabola_pushforward_samples(200, rng)
    outputs.append(
        fileio.write_matrix_csv(out / "pushforward_scatter.csv", scatter, "x_1,x_2")
    )
    x1, x2, density = demo.rosenbrock_density_grid()
    grid_rows = [
        (x1[j], x2[i], density[i, j])
        for i in range(len(x2))
        for j in range(len(x1))
    ]
    outputs.append(
        fileio.write_matrix_csv(
            out / "rosenbrock_density.csv", np.array(grid_rows), "x_1,x_2,density"
        )
    )
    single_frac = float(demo.in_dominant_basin(single.posterior_samples).mean())
    pt_frac = float(
        demo.in_dominant_basin(tempered.posterior_samples[-500:]).mean()
    )
    extra = {
        "single_chain_dominant_fraction": single_frac,
        "tempered_final500_dominant_fraction": pt_frac,
        "ladder": list(tempered.temperatures),
    }
    _write_manifest(out, "rosenbrock-demo", args, extra=extra, outputs=outputs,
                    wall_time=time.perf_counter() - t0)
    print(json.dumps(extra, indent=2))
    return 0


def cmd_lipschitz(args):
    out = _out_dir(args)
    decoder, _, _ = _load_decoder(args)
    bound = lipschitz_upper_bound(decoder, tol=args.tol)
    result = {"lipschitz_upper_bound": bound, "tol": args.tol}
    path = out / "lipschitz.json"
    path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "lipschitz", args, extra=result, outputs=[path])
    print(json.dumps(result, indent=2))
    return 0


def cmd_check_model(args):
    out = _out_dir(args)
    decoder, _, _ = _load_decoder(args)
    operator = _build_operator(args, decoder.ambient_dim)
    y = np.zeros(operator.output_dim)
    pf = PotentialFn(decoder, Observation(y=y, sigma=args.sigma, operator=operator))
    report = check_wellposedness(pf)
    path = out / "wellposedness.json"
    path.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "check-model", args,
                    extra={"all_satisfied": report.all_satisfied}, outputs=[path])
    print(json.dumps(report.as_dict(), indent=2))
    return 0


def cmd_batch_psnr(args):
    out = _out_dir(args)
    t0 = time.perf_counter()
    decoder, _, _ = _load_decoder(args)
    dataset = Path(args.dataset)
    files = sorted(dataset.glob("*.csv")) + sorted(dataset.glob("*.pgm"))
    if not files:
        raise UsageError(f"no .csv or .pgm images under {dataset}")

    ladder = TemperatureLadder.from_spec(args.ladder, args.chains)
    rows = []
    skipped = []
    for index, path in enumerate(files):
        try:
            x = fileio.read_image(path)
            operator = _build_operator(args, x.shape[0])
            seed = derive_seed(args.seed, index)
            rng = np.random.default_rng(seed)
            y = operator.apply(x) + args.sigma * rng.standard_normal(operator.output_dim)
            pf = PotentialFn(
                decoder, Observation(y=y, sigma=args.sigma, operator=operator)
            )
            config = replace(_config_from_args(args), master_seed=seed)
            trace = run_sampler(pf, ladder, config)
            summary = analysis.mmse_estimate(trace.posterior_samples, decoder)
            psnr_mmse = psnr(summary.mmse_image, x)
            psnr_obs = (
                psnr(y, x) if isinstance(operator, IdentityOperator) else math.nan
            )
            rows.append((index, path.name, seed, psnr_obs, psnr_mmse))
        except (ValueError, OSError) as exc:
            print(f"skipping {path.name}: {exc}", file=sys.stderr)
            skipped.append(path.name)

    if not rows:
        raise UsageError("all images were unreadable")
    table = "\n".join(
        f"{i},{name},{seed},{po:.17g},{pm:.17g}" for i, name, seed, po, pm in rows
    )
    per_image = out / "per_image_psnr.csv"
    per_image.write_text("index,file,seed,psnr_observation,psnr_mmse\n" + table + "\n")
    values = np.array([r[4] for r in rows])
    summary = {
        "mean_psnr_db": float(values.mean()),
        "sd_psnr_db": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
        "n_images": len(rows),
        "n_skipped": len(skipped),
        "skipped": skipped,
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "batch-psnr", args, extra=summary,
                    outputs=[per_image, path], wall_time=time.perf_counter() - t0)
    print(json.dumps(summary, indent=2))
    if len(skipped) > 0.01 * len(files):
        print(f"error: {len(skipped)}/{len(files)} images skipped", file=sys.stderr)
        return 2
    return 0


def cmd_decode(args):
    out = _out_dir(args)
    decoder, _, _ = _load_decoder(args)
    latents = fileio.read_matrix_csv(args.latents)
    if latents.ndim != 2 or latents.shape[1] != decoder.latent_dim:
        raise UsageError(
            f"latents must be (n, {decoder.latent_dim}); got {latents.shape}"
        )
    images = decoder.decode_batch(latents)
    header = ",".join(f"x_{j + 1}" for j in range(decoder.ambient_dim))
    path = fileio.write_matrix_csv(out / "decoded.csv", images, header)
    _write_manifest(out, "decode", args, outputs=[path])
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="latentmc", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"latentmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an observation y = A x + noise")
    p.add_argument("--image", required=True, help="ground-truth image (.csv or .pgm)")
    p.add_argument("--seed", type=int, default=0)
    _add_operator_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="run the PT-pCN sampler on an observation")
    p.add_argument("--y", required=True, help="observation CSV (from simulate)")
    p.add_argument("--obs-meta", default=None, help="sidecar JSON (default: y.json)")
    p.add_argument("--seed", type=int, default=0)
    _add_decoder_source(p)
    _add_sampler_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="MMSE image and PCA map from traces")
    p.add_argument("--trace", required=True, help="directory with trace_*.csv")
    p.add_argument("--truth", default=None, help="ground truth for PSNR")
    p.add_argument("--pca", action="store_true")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    _add_decoder_source(p)
    _add_out(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evidence", help="thermodynamic-integration log evidence")
    p.add_argument("--y", required=True)
    p.add_argument("--obs-meta", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference", default=None,
                   help="reference distribution CSV for the misspecification test")
    p.add_argument("--significance", type=float, default=0.05)
    _add_decoder_source(p)
    _add_sampler_flags(p, chains_default=10, ladder_default="power5")
    _add_out(p)
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("coverage", help="frequentist coverage of HPD credible sets")
    p.add_argument("--images", default=None, help="directory of test images")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate N test images by decoding prior draws")
    p.add_argument("--levels", default="0.8,0.9,0.95")
    p.add_argument("--stochastic-encode", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _add_decoder_source(p)
    _add_operator_flags(p)
    _add_sampler_flags(p, samples_default=2_000, burn_in_default=500,
                       chains_default=1, ladder_default="explicit:1.0")
    _add_out(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("dim-check", help="latent-dimension diagnostic on encodings")
    p.add_argument("--encodings", required=True, help="CSV of encoder means")
    _add_out(p)
    p.set_defaults(func=cmd_dim_check)

    p = sub.add_parser("rosenbrock-demo",
                       help="escape-from-local-mode demo plus manifold scatter data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=500)
    _add_out(p)
    p.set_defaults(func=cmd_rosenbrock_demo)

    p = sub.add_parser("lipschitz", help="Lipschitz upper bound of a decoder")
    p.add_argument("--tol", type=float, default=1e-8)
    _add_decoder_source(p)
    _add_out(p)
    p.set_defaults(func=cmd_lipschitz)

    p = sub.add_parser("check-model", help="verify well-posedness hypotheses")
    p.add_argument("--seed", type=int, default=0)
    _add_decoder_source(p)
    _add_operator_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_check_model)

    p = sub.add_parser("batch-psnr", help="per-image simulate/sample/estimate PSNR")
    p.add_argument("--dataset", required=True, help="directory of images")
    p.add_argument("--seed", type=int, default=0)
    _add_decoder_source(p)
    _add_operator_flags(p)
    _add_sampler_flags(p, samples_default=5_000, burn_in_default=1_000)
    _add_out(p)
    p.set_defaults(func=cmd_batch_psnr)

    p = sub.add_parser("decode", help="decode latent vectors to images")
    p.add_argument("--latents", required=True, help="CSV of latent row vectors")
    _add_decoder_source(p)
    _add_out(p)
    p.set_defaults(func=cmd_decode)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
