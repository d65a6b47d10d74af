import * as tf from '@tensorflow/tfjs';

const FAR = 1e9; // masks invalid pairs out of min-reductions

/** Pairwise Euclidean distances between embedding rows. The squared
 * distances are clamped away from zero before the sqrt: its gradient is
 * infinite at exactly zero (the diagonal always is), which would turn the
 * whole gradient to NaN on the first step. */
export function pairwiseDistances(embeddings: tf.Tensor2D): tf.Tensor2D {
  return tf.tidy(() => {
    const dots = tf.matMul(embeddings, embeddings, false, true);
    const sq = tf.sum(tf.square(embeddings), 1, true);
    const d2 = sq.add(sq.transpose()).sub(dots.mul(2));
    return d2.maximum(1e-12).sqrt() as tf.Tensor2D;
  });
}

export interface HardPairs {
  posDist: tf.Tensor1D; // per anchor: its hardest (farthest) positive
  negDist: tf.Tensor1D; // per anchor: its hardest (closest) negative
}

/** Batch-hard selection. Self-pairs are excluded from positive selection;
 * every anchor must have at least one other image of its identity and one
 * other identity in the batch (the sampler guarantees both). */
export function batchHard(distances: tf.Tensor2D, labels: tf.Tensor1D): HardPairs {
  return tf.tidy(() => {
    const n = distances.shape[0];
    const same = tf.equal(labels.reshape([n, 1]), labels.reshape([1, n]));
    const eye = tf.eye(n).cast('bool');
    const posMask = tf.logicalAnd(same, tf.logicalNot(eye));
    const negMask = tf.logicalNot(same);
    const posDist = distances.mul(posMask.cast('float32')).max(1) as tf.Tensor1D;
    const negDist = distances
      .add(tf.logicalNot(negMask).cast('float32').mul(FAR))
      .min(1) as tf.Tensor1D;
    return { posDist, negDist };
  });
}

/** Margin-contrastive loss over batch-hard pairs:
 * per anchor, d_pos^2 + max(0, margin - d_neg)^2, averaged. */
export function marginContrastiveLoss(
  embeddings: tf.Tensor2D, labels: tf.Tensor1D, margin: number): tf.Scalar {
  return tf.tidy(() => {
    const { posDist, negDist } = batchHard(pairwiseDistances(embeddings), labels);
    const posTerm = posDist.square();
    const negTerm = tf.relu(tf.scalar(margin).sub(negDist)).square();
    return posTerm.add(negTerm).mean() as tf.Scalar;
  });
}
