/**
 * Weights file pair shared with the sampling backend:
 * `<stem>.manifest.json` (layer descriptors with element offsets into the
 * blob) plus `<stem>.bin` (little-endian float32, matrices row-major).
 * Offsets are authoritative and must not overlap, so the encoder trunk is
 * duplicated between the encoder_mean and encoder_logvar networks.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Matrix, fromArray } from "./tensor.js";
import { Activation, Dense, Vae } from "./vae.js";

export interface LayerDescriptor {
  rows: number;
  cols: number;
  activation: Activation;
  weight_offset: number;
  bias_offset: number;
}

export interface WeightsManifest {
  dtype: "f32";
  latent_dim: number;
  ambient_dim: number;
  networks: Record<string, LayerDescriptor[]>;
}

interface LayerData {
  rows: number;
  cols: number;
  activation: Activation;
  weight: Float64Array; // row-major (rows, cols)
  bias: Float64Array;
}

function denseToLayerData(layer: Dense): LayerData {
  return {
    rows: layer.W.rows,
    cols: layer.W.cols,
    activation: layer.activation,
    weight: layer.W.data,
    bias: Float64Array.from(layer.b),
  };
}

/** First/last half of the 2m-wide encoder head as separate identity layers. */
function splitEncoderHead(head: Dense, latentDim: number): [LayerData, LayerData] {
  const cols = head.W.cols;
  const take = (start: number): LayerData => ({
    rows: latentDim,
    cols,
    activation: "identity",
    weight: head.W.data.slice(start * cols, (start + latentDim) * cols),
    bias: Float64Array.from(head.b.slice(start, start + latentDim)),
  });
  return [take(0), take(latentDim)];
}

export function vaeToNetworks(model: Vae): Record<string, LayerData[]> {
  const [meanHead, logVarHead] = splitEncoderHead(model.encoderHead, model.arch.latentDim);
  const trunk = model.encoderTrunk.map(denseToLayerData);
  return {
    decoder_mean: model.decoderLayers.map(denseToLayerData),
    encoder_mean: [...trunk, meanHead],
    encoder_logvar: [...trunk.map((l) => ({ ...l })), logVarHead],
  };
}

export function saveWeights(stem: string, model: Vae): { manifestPath: string; blobPath: string } {
  const networks = vaeToNetworks(model);
  let offset = 0;
  const manifestNetworks: Record<string, LayerDescriptor[]> = {};
  const chunks: Float64Array[] = [];
  for (const [role, layers] of Object.entries(networks)) {
    manifestNetworks[role] = layers.map((layer) => {
      const weightOffset = offset;
      offset += layer.rows * layer.cols;
      const biasOffset = offset;
      offset += layer.rows;
      chunks.push(layer.weight, layer.bias);
      return {
        rows: layer.rows,
        cols: layer.cols,
        activation: layer.activation,
        weight_offset: weightOffset,
        bias_offset: biasOffset,
      };
    });
  }
  const blob = new Float32Array(offset);
  let cursor = 0;
  for (const chunk of chunks) {
    blob.set(Float32Array.from(chunk), cursor);
    cursor += chunk.length;
  }
  const manifest: WeightsManifest = {
    dtype: "f32",
    latent_dim: model.arch.latentDim,
    ambient_dim: model.arch.inputDim,
    networks: manifestNetworks,
  };
  const manifestPath = `${stem}.manifest.json`;
  const blobPath = `${stem}.bin`;
  fs.mkdirSync(path.dirname(path.resolve(manifestPath)), { recursive: true });
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  fs.writeFileSync(blobPath, Buffer.from(blob.buffer));
  return { manifestPath, blobPath };
}

export interface LoadedNetwork {
  layers: { W: Matrix; b: Float64Array; activation: Activation }[];
  inputDim: number;
  outputDim: number;
}

export interface LoadedWeights {
  latentDim: number;
  ambientDim: number;
  decoderMean: LoadedNetwork;
  encoderMean?: LoadedNetwork;
  encoderLogVar?: LoadedNetwork;
}

function readNetwork(descriptors: LayerDescriptor[], blob: Float32Array): LoadedNetwork {
  const layers = descriptors.map((desc) => {
    const size = desc.rows * desc.cols;
    if (desc.weight_offset + size > blob.length || desc.bias_offset + desc.rows > blob.length) {
      throw new Error("blob too short for declared offsets");
    }
    const W = fromArray(desc.rows, desc.cols, blob.subarray(desc.weight_offset, desc.weight_offset + size));
    const b = Float64Array.from(blob.subarray(desc.bias_offset, desc.bias_offset + desc.rows));
    return { W, b, activation: desc.activation };
  });
  return {
    layers,
    inputDim: layers[0].W.cols,
    outputDim: layers[layers.length - 1].W.rows,
  };
}

export function loadWeights(stem: string): LoadedWeights {
  const manifest = JSON.parse(fs.readFileSync(`${stem}.manifest.json`, "utf8")) as WeightsManifest;
  if (manifest.dtype !== "f32") throw new Error(`unsupported dtype ${manifest.dtype}`);
  const raw = fs.readFileSync(`${stem}.bin`);
  const blob = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  const out: LoadedWeights = {
    latentDim: manifest.latent_dim,
    ambientDim: manifest.ambient_dim,
    decoderMean: readNetwork(manifest.networks.decoder_mean, blob),
  };
  if (manifest.networks.encoder_mean) {
    out.encoderMean = readNetwork(manifest.networks.encoder_mean, blob);
  }
  if (manifest.networks.encoder_logvar) {
    out.encoderLogVar = readNetwork(manifest.networks.encoder_logvar, blob);
  }
  return out;
}

/** Forward pass through a loaded network (batched). */
export function networkForward(net: LoadedNetwork, x: Matrix): Matrix {
  let h = x;
  for (const layer of net.layers) {
    const y = new Float64Array(h.rows * layer.W.rows);
    for (let i = 0; i < h.rows; i++) {
      for (let r = 0; r < layer.W.rows; r++) {
        let s = layer.b[r];
        const wRow = r * layer.W.cols;
        const xRow = i * h.cols;
        for (let c = 0; c < layer.W.cols; c++) {
          s += layer.W.data[wRow + c] * h.data[xRow + c];
        }
        y[i * layer.W.rows + r] = layer.activation === "relu" && s < 0 ? 0 : s;
      }
    }
    h = { rows: h.rows, cols: layer.W.rows, data: y };
  }
  return h;
}
