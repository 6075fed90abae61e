import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { spawnSync } from "node:child_process";

import { afterAll, describe, expect, test } from "vitest";

import { Rng, zeros } from "../src/tensor.js";
import { Vae } from "../src/vae.js";
import {
  LayerDescriptor,
  loadWeights,
  networkForward,
  saveWeights,
} from "../src/weights.js";

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "vae-weights-"));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function makeModel(seed = 5) {
  return new Vae({ inputDim: 9, latentDim: 2, hidden: [7, 6] }, new Rng(seed));
}

describe("weights export", () => {
  test("manifest offsets are disjoint and inside the blob", () => {
    const model = makeModel();
    const { manifestPath, blobPath } = saveWeights(path.join(tmp, "m"), model);
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8"));
    expect(manifest.dtype).toBe("f32");
    const blobElements = fs.statSync(blobPath).size / 4;
    const spans: [number, number][] = [];
    for (const layers of Object.values(manifest.networks) as LayerDescriptor[][]) {
      for (const desc of layers) {
        spans.push([desc.weight_offset, desc.rows * desc.cols]);
        spans.push([desc.bias_offset, desc.rows]);
      }
    }
    spans.sort((a, b) => a[0] - b[0]);
    let end = 0;
    for (const [off, size] of spans) {
      expect(off).toBeGreaterThanOrEqual(end);
      end = off + size;
    }
    expect(end).toBeLessThanOrEqual(blobElements);
  });

  test("declares all three network roles with the right shapes", () => {
    const model = makeModel();
    const { manifestPath } = saveWeights(path.join(tmp, "roles"), model);
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8"));
    expect(Object.keys(manifest.networks).sort()).toEqual([
      "decoder_mean",
      "encoder_logvar",
      "encoder_mean",
    ]);
    const dec = manifest.networks.decoder_mean;
    expect(dec[0].cols).toBe(2); // latent in
    expect(dec[dec.length - 1].rows).toBe(9); // pixels out
    expect(dec[dec.length - 1].activation).toBe("identity");
    const encMean = manifest.networks.encoder_mean;
    expect(encMean[encMean.length - 1].rows).toBe(2);
  });

  test("round trip reproduces weights to f32 precision", () => {
    const model = makeModel();
    saveWeights(path.join(tmp, "rt"), model);
    const loaded = loadWeights(path.join(tmp, "rt"));
    expect(loaded.latentDim).toBe(2);
    expect(loaded.ambientDim).toBe(9);
    const original = model.decoderLayers[0].W.data;
    const reloaded = loaded.decoderMean.layers[0].W.data;
    for (let i = 0; i < original.length; i++) {
      expect(Math.abs(reloaded[i] - original[i])).toBeLessThanOrEqual(
        Math.abs(original[i]) * 1e-7 + 1e-9,
      );
    }
  });

  test("loaded encoder heads reproduce encode()", () => {
    const model = makeModel();
    saveWeights(path.join(tmp, "enc"), model);
    const loaded = loadWeights(path.join(tmp, "enc"));
    const rng = new Rng(9);
    const x = zeros(5, 9);
    for (let i = 0; i < x.data.length; i++) x.data[i] = rng.uniform();
    const direct = model.encode(x);
    const viaMean = networkForward(loaded.encoderMean!, x);
    const viaLogVar = networkForward(loaded.encoderLogVar!, x);
    for (let i = 0; i < direct.mean.data.length; i++) {
      expect(Math.abs(viaMean.data[i] - direct.mean.data[i])).toBeLessThan(1e-4);
      expect(Math.abs(viaLogVar.data[i] - direct.logVar.data[i])).toBeLessThan(1e-4);
    }
  });
});

describe("decode parity with the sampling backend", () => {
  const repoRoot = path.resolve(__dirname, "..", "..");
  const pythonEnv = {
    ...process.env,
    PYTHONPATH: path.join(repoRoot, "src"),
  };
  const probe = spawnSync("python3", ["-c", "import latentmc"], { env: pythonEnv });
  const backendAvailable = probe.status === 0;

  test.skipIf(!backendAvailable)(
    "backend decodes exported weights within f32 rounding (100 latents)",
    () => {
      const model = makeModel(31);
      const stem = path.join(tmp, "parity");
      saveWeights(stem, model);

      const rng = new Rng(77);
      const n = 100;
      const z = zeros(n, 2);
      for (let i = 0; i < z.data.length; i++) z.data[i] = rng.gaussian();
      const zLines = ["z_1,z_2"];
      for (let i = 0; i < n; i++) {
        zLines.push(`${z.data[2 * i].toPrecision(17)},${z.data[2 * i + 1].toPrecision(17)}`);
      }
      const zPath = path.join(tmp, "latents.csv");
      fs.writeFileSync(zPath, zLines.join("\n") + "\n");

      const outDir = path.join(tmp, "decoded");
      const run = spawnSync(
        "python3",
        ["-m", "latentmc.cli", "decode", "--weights", stem, "--latents", zPath,
         "--out", outDir],
        { env: pythonEnv, encoding: "utf8" },
      );
      expect(run.status, run.stderr).toBe(0);

      const lines = fs.readFileSync(path.join(outDir, "decoded.csv"), "utf8")
        .trim().split("\n").slice(1);
      const mine = model.decodeMean(z);
      let maxDiff = 0;
      lines.forEach((line, i) => {
        line.split(",").forEach((value, j) => {
          const diff = Math.abs(Number(value) - mine.data[i * 9 + j]);
          if (diff > maxDiff) maxDiff = diff;
        });
      });
      expect(maxDiff).toBeLessThanOrEqual(1e-4);
    },
  );
});
