/** Shared test fixtures: synthetic low-rank image sets, tiny configs. */

import { ImageSet } from "../src/mnist.js";
import { Rng, zeros } from "../src/tensor.js";

/**
 * Synthetic dataset with intrinsic dimension ``factors``: pixels are affine
 * mixes of a few latent factors squashed into [0, 1].
 */
export function syntheticImages(
  count: number,
  side: number,
  factors: number,
  seed: number,
): ImageSet {
  const rng = new Rng(seed);
  const pixels = side * side;
  const mixing = zeros(pixels, factors);
  for (let i = 0; i < mixing.data.length; i++) mixing.data[i] = rng.gaussian();
  const images = zeros(count, pixels);
  for (let i = 0; i < count; i++) {
    const z = Array.from({ length: factors }, () => rng.gaussian());
    for (let p = 0; p < pixels; p++) {
      let v = 0;
      for (let f = 0; f < factors; f++) v += mixing.data[p * factors + f] * z[f];
      images.data[i * pixels + p] = Math.min(1, Math.max(0, 0.5 + 0.15 * v));
    }
  }
  return { count, rows: side, cols: side, images };
}

export const tinyConfig = {
  hidden: [16, 16],
  epochs: 3,
  batchSize: 25,
  seed: 7,
};
