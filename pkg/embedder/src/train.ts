import * as tf from '@tensorflow/tfjs';

import { Dataset, sampleBatch } from './data';
import { batchHard, marginContrastiveLoss, pairwiseDistances } from './loss';
import { buildEmbeddingNet, saveModel } from './model';
import { makeRng } from './rng';
import { NetSpec, TrainSpec } from './types';

/** Per-iteration record sufficient to audit batch-hard selection offline. */
export interface BatchLog {
  iteration: number;
  loss: number;
  labels: number[];
  distances: Float32Array; // flattened n x n
  posDist: Float32Array;
  negDist: Float32Array;
}

export interface TrainResult {
  model: tf.LayersModel;
  lossTrace: number[];
  batchLogs: BatchLog[];
}

export async function train(dataset: Dataset, net: NetSpec, spec: TrainSpec,
                            options: { checkpointPath?: string; logBatches?: number;
                                       backbone?: tf.LayersModel; quiet?: boolean } = {},
                            ): Promise<TrainResult> {
  const model = buildEmbeddingNet(net, options.backbone);
  const rand = makeRng(spec.seed);
  const lossTrace: number[] = [];
  const batchLogs: BatchLog[] = [];
  let lr = spec.learningRate;
  let optimizer = tf.train.adam(lr);

  for (let iter = 0; iter < spec.iterations; iter++) {
    if (spec.decayMilestones.includes(iter)) {
      optimizer.dispose();
      lr /= 10;
      optimizer = tf.train.adam(lr);
    }
    const batch = sampleBatch(dataset, net, spec, rand);
    const lossFn = () =>
      marginContrastiveLoss(
        model.apply(batch.crops, { training: true }) as tf.Tensor2D,
        batch.labels, spec.margin);
    const { value, grads } = tf.variableGrads(lossFn);
    // variableGrads types its result as NamedTensorMap; the optimizer's
    // variable-map overload is what actually applies here
    optimizer.applyGradients(
      grads as import('@tensorflow/tfjs-core/dist/tensor_types').NamedVariableMap);
    const loss = value.dataSync()[0];
    lossTrace.push(loss);

    if (options.logBatches && batchLogs.length < options.logBatches) {
      const logged = tf.tidy(() => {
        const emb = model.predict(batch.crops) as tf.Tensor2D;
        const dist = pairwiseDistances(emb);
        const { posDist, negDist } = batchHard(dist, batch.labels);
        return {
          distances: dist.dataSync() as Float32Array,
          posDist: posDist.dataSync() as Float32Array,
          negDist: negDist.dataSync() as Float32Array,
        };
      });
      batchLogs.push({
        iteration: iter,
        loss,
        labels: Array.from(batch.labels.dataSync()),
        ...logged,
      });
    }

    value.dispose();
    Object.values(grads).forEach((g) => g.dispose());
    batch.crops.dispose();
    batch.labels.dispose();

    if (!options.quiet && (iter % 25 === 0 || iter === spec.iterations - 1)) {
      console.log(`iter ${iter} loss ${loss.toFixed(5)} lr ${lr}`);
    }
    if (options.checkpointPath && spec.checkpointEvery > 0
        && (iter + 1) % spec.checkpointEvery === 0) {
      await saveModel(model, options.checkpointPath);
    }
  }
  optimizer.dispose();
  if (options.checkpointPath) {
    await saveModel(model, options.checkpointPath);
  }
  return { model, lossTrace, batchLogs };
}
