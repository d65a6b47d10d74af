import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';

import { NetSpec } from './types';

/** Projects activations onto the unit hypersphere, which bounds pairwise
 * Euclidean distance to [0, 2] and the derived affinity 1 - d to [-1, 1]. */
class L2Normalize extends tf.layers.Layer {
  static className = 'L2Normalize';

  call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    const x = Array.isArray(inputs) ? inputs[0] : inputs;
    return tf.tidy(() => {
      const norm = tf.norm(x, 'euclidean', -1, true).maximum(1e-12);
      return tf.div(x, norm);
    });
  }

  computeOutputShape(inputShape: tf.Shape): tf.Shape {
    return inputShape;
  }
}
tf.serialization.registerClass(L2Normalize);

/** Conv feature extractor ending in a (h/4, w/4, channels[last]) map.
 * Stands in for a pretrained truncated backbone when none is supplied;
 * deployments pass a saved backbone via loadModel and get the same head. */
function surrogateBackbone(model: tf.Sequential, spec: NetSpec): void {
  spec.backboneChannels.forEach((filters, i) => {
    model.add(tf.layers.conv2d({
      inputShape: i === 0 ? [spec.inputHeight, spec.inputWidth, 3] : undefined,
      filters,
      kernelSize: 3,
      strides: i < 2 ? 2 : 1,
      padding: 'same',
      activation: 'relu',
    }));
  });
}

export function buildEmbeddingNet(spec: NetSpec, backbone?: tf.LayersModel): tf.LayersModel {
  const model = tf.sequential();
  if (backbone) {
    model.add(backbone as unknown as tf.layers.Layer);
  } else {
    surrogateBackbone(model, spec);
  }
  model.add(tf.layers.flatten());
  model.add(tf.layers.dense({ units: spec.embeddingDim, activation: 'relu' }));
  model.add(tf.layers.dense({ units: spec.embeddingDim }));
  model.add(tf.layers.batchNormalization());
  model.add(new L2Normalize());
  return model;
}

/** Embed a batch of [n, h, w, 3] crops in inference mode (unit-norm rows). */
export function embedBatch(model: tf.LayersModel, crops: tf.Tensor4D): tf.Tensor2D {
  return tf.tidy(() => model.predict(crops) as tf.Tensor2D);
}

// tfjs file handlers need the node backend; a JSON round trip of the model
// artifacts keeps checkpoints dependency-free and portable.
export async function saveModel(model: tf.LayersModel, path: string): Promise<void> {
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    const payload = {
      modelTopology: artifacts.modelTopology,
      weightSpecs: artifacts.weightSpecs,
      weightData: Buffer.from(artifacts.weightData as ArrayBuffer).toString('base64'),
    };
    fs.writeFileSync(path, JSON.stringify(payload));
    return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
  }));
}

export async function loadModel(path: string): Promise<tf.LayersModel> {
  const payload = JSON.parse(fs.readFileSync(path, 'utf8'));
  const weightData = Uint8Array.from(Buffer.from(payload.weightData, 'base64')).buffer;
  return tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: payload.modelTopology,
    weightSpecs: payload.weightSpecs,
    weightData,
  }));
}
