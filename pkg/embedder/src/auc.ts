import * as tf from '@tensorflow/tfjs';

import { Dataset, imageToTensor } from './data';
import { embedBatch } from './model';
import { makeRng } from './rng';
import { NetSpec } from './types';

/** Area under the ROC curve from positive/negative pair scores
 * (Mann-Whitney rank statistic, ties averaged). */
export function aucFromScores(positive: number[], negative: number[]): number {
  const all = positive.map((s) => ({ s, pos: 1 }))
    .concat(negative.map((s) => ({ s, pos: 0 })))
    .sort((a, b) => a.s - b.s);
  let rankSumPos = 0;
  let i = 0;
  let rank = 1;
  while (i < all.length) {
    let j = i;
    while (j < all.length && all[j].s === all[i].s) j++;
    const avgRank = (rank + rank + (j - i - 1)) / 2;
    for (let k = i; k < j; k++) if (all[k].pos) rankSumPos += avgRank;
    rank += j - i;
    i = j;
  }
  const nPos = positive.length;
  const nNeg = negative.length;
  return (rankSumPos - (nPos * (nPos + 1)) / 2) / (nPos * nNeg);
}

export interface PairSample {
  scores: { positive: number[]; negative: number[] };
  auc: number;
}

/** Score an equal mix of same-identity and cross-identity pairs from
 * held-out identities by appearance affinity (1 - distance). */
export function validate(model: tf.LayersModel, heldout: Dataset, net: NetSpec,
                         pairs = 500, seed = 7): PairSample {
  if (heldout.identities.length < 2) {
    throw new Error('validation needs at least 2 held-out identities');
  }
  const rand = makeRng(seed);
  const embeddings = new Map<string, tf.Tensor2D>();
  for (const identity of heldout.identities) {
    const imgs = heldout.images.get(identity)!;
    const crops = tf.stack(imgs.map((im) => imageToTensor(im, net))) as tf.Tensor4D;
    embeddings.set(identity, embedBatch(model, crops));
    crops.dispose();
  }
  const affinity = (a: tf.Tensor2D, i: number, b: tf.Tensor2D, j: number) => {
    return tf.tidy(() => {
      const d = a.slice([i, 0], [1, -1]).sub(b.slice([j, 0], [1, -1]))
        .norm('euclidean').dataSync()[0];
      return 1 - d;
    });
  };
  const ids = heldout.identities;
  const positive: number[] = [];
  const negative: number[] = [];
  for (let k = 0; k < pairs; k++) {
    const idA = ids[Math.floor(rand() * ids.length)];
    const embA = embeddings.get(idA)!;
    const nA = embA.shape[0];
    const i = Math.floor(rand() * nA);
    let j = Math.floor(rand() * nA);
    if (j === i) j = (j + 1) % nA;
    positive.push(affinity(embA, i, embA, j));

    let idB = ids[Math.floor(rand() * ids.length)];
    if (idB === idA) idB = ids[(ids.indexOf(idB) + 1) % ids.length];
    const embB = embeddings.get(idB)!;
    negative.push(affinity(embA, i, embB, Math.floor(rand() * embB.shape[0])));
  }
  for (const t of embeddings.values()) t.dispose();
  return { scores: { positive, negative }, auc: aucFromScores(positive, negative) };
}
