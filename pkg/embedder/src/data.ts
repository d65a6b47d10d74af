import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';

import { RawImage, readPpm, writePpm } from './ppm';
import { makeRng, sampleWithoutReplacement, shuffleInPlace } from './rng';
import { NetSpec, TrainSpec } from './types';

/** Identity-labeled person crops, `dataset/<identity>/<image>.ppm`. */
export interface Dataset {
  identities: string[];
  images: Map<string, RawImage[]>;
}

export function loadDataset(dir: string): Dataset {
  const identities: string[] = [];
  const images = new Map<string, RawImage[]>();
  for (const entry of fs.readdirSync(dir).sort()) {
    const sub = path.join(dir, entry);
    if (!fs.statSync(sub).isDirectory()) continue;
    const files = fs.readdirSync(sub).filter((f) => f.endsWith('.ppm')).sort();
    if (files.length < 2) {
      console.warn(`identity ${entry}: fewer than 2 images, excluded`);
      continue;
    }
    identities.push(entry);
    images.set(entry, files.map((f) => readPpm(path.join(sub, f))));
  }
  return { identities, images };
}

/** Disjoint train / held-out identity split, shuffled by the seed. */
export function splitIdentities(dataset: Dataset, heldoutFraction: number,
                                seed: number): { train: Dataset; heldout: Dataset } {
  const order = shuffleInPlace(dataset.identities.slice(), makeRng(seed));
  const nHeld = Math.max(2, Math.round(order.length * heldoutFraction));
  const heldIds = new Set(order.slice(0, nHeld));
  const pick = (keep: (id: string) => boolean): Dataset => {
    const ids = dataset.identities.filter(keep);
    return { identities: ids, images: new Map(ids.map((i) => [i, dataset.images.get(i)!])) };
  };
  return {
    train: pick((id) => !heldIds.has(id)),
    heldout: pick((id) => heldIds.has(id)),
  };
}

export function imageToTensor(image: RawImage, spec: NetSpec): tf.Tensor3D {
  return tf.tidy(() => {
    const t = tf.tensor3d(image.data, [image.height, image.width, 3], 'int32')
      .toFloat().div(255) as tf.Tensor3D;
    if (image.height === spec.inputHeight && image.width === spec.inputWidth) return t;
    return tf.image.resizeBilinear(t, [spec.inputHeight, spec.inputWidth]);
  });
}

export interface Batch {
  crops: tf.Tensor4D;   // [n, h, w, 3]
  labels: tf.Tensor1D;  // int32 identity indices
  labelNames: string[]; // per row
}

/** Sample identitiesPerBatch identities x imagesPerIdentity crops each. */
export function sampleBatch(dataset: Dataset, net: NetSpec, spec: TrainSpec,
                            rand: () => number): Batch {
  if (dataset.identities.length < 2) {
    throw new Error('need at least 2 identities to form contrastive batches');
  }
  const k = Math.min(spec.identitiesPerBatch, dataset.identities.length);
  const chosen = sampleWithoutReplacement(dataset.identities, k, rand);
  const tensors: tf.Tensor3D[] = [];
  const labels: number[] = [];
  const labelNames: string[] = [];
  chosen.forEach((identity, index) => {
    const pool = dataset.images.get(identity)!;
    for (let i = 0; i < spec.imagesPerIdentity; i++) {
      // with replacement once the identity's pool is exhausted
      const image = pool.length >= spec.imagesPerIdentity
        ? pool[(i + Math.floor(rand() * pool.length)) % pool.length]
        : pool[Math.floor(rand() * pool.length)];
      tensors.push(imageToTensor(image, net));
      labels.push(index);
      labelNames.push(identity);
    }
  });
  const crops = tf.stack(tensors) as tf.Tensor4D;
  tensors.forEach((t) => t.dispose());
  return { crops, labels: tf.tensor1d(labels, 'int32'), labelNames };
}

/** Synthetic identity-labeled crops for tests and demos: each identity is a
 * distinct color/stripe pattern, images vary by noise and a small shift. */
export function makeSyntheticDataset(dir: string, identities: number,
                                     imagesPerIdentity: number, seed: number,
                                     height = 64, width = 32): void {
  const rand = makeRng(seed);
  fs.mkdirSync(dir, { recursive: true });
  for (let id = 0; id < identities; id++) {
    const base = [rand() * 255, rand() * 255, rand() * 255];
    const stripe = [rand() * 255, rand() * 255, rand() * 255];
    const period = 4 + Math.floor(rand() * 8);
    const sub = path.join(dir, `id${String(id).padStart(3, '0')}`);
    fs.mkdirSync(sub, { recursive: true });
    for (let k = 0; k < imagesPerIdentity; k++) {
      const shift = Math.floor(rand() * period);
      const data = new Uint8Array(height * width * 3);
      for (let y = 0; y < height; y++) {
        for (let x = 0; x < width; x++) {
          const striped = Math.floor((y + shift) / period) % 2 === 0;
          const color = striped ? stripe : base;
          for (let c = 0; c < 3; c++) {
            const noise = (rand() - 0.5) * 24;
            data[(y * width + x) * 3 + c] = Math.max(0, Math.min(255, color[c] + noise));
          }
        }
      }
      writePpm(path.join(sub, `img${k}.ppm`), { width, height, data });
    }
  }
}
