export const EMBEDDING_DIM = 128;

/** Network shape. Defaults follow the production structure: 128x64 person
 * crops reduced by the backbone to a 32x16x256 feature map, then two dense
 * layers of width 128 with batch norm and l2 normalization on the output.
 * Smaller values exist for CPU-bound tests and experiments. */
export interface NetSpec {
  inputHeight: number;
  inputWidth: number;
  backboneChannels: number[]; // first two stages stride 2 (4x reduction)
  embeddingDim: number;
}

export const defaultNetSpec: NetSpec = {
  inputHeight: 128,
  inputWidth: 64,
  backboneChannels: [64, 128, 256],
  embeddingDim: EMBEDDING_DIM,
};

/** Training regime: 4 images each from 32 identities per batch (128 crops),
 * batch-hard pairing, margin-contrastive loss with margin 0.2. */
export interface TrainSpec {
  identitiesPerBatch: number;
  imagesPerIdentity: number;
  margin: number;
  iterations: number;
  learningRate: number;
  decayMilestones: number[]; // iteration indices where lr drops 10x
  heldoutFraction: number;   // identities held out for validation
  seed: number;
  checkpointEvery: number;   // 0 disables intermediate checkpoints
}

export const defaultTrainSpec: TrainSpec = {
  identitiesPerBatch: 32,
  imagesPerIdentity: 4,
  margin: 0.2,
  iterations: 90_000,
  learningRate: 1e-4,
  decayMilestones: [30_000, 60_000],
  heldoutFraction: 0.2,
  seed: 1,
  checkpointEvery: 0,
};

export function batchSize(spec: TrainSpec): number {
  return spec.identitiesPerBatch * spec.imagesPerIdentity;
}
