import * as fs from 'fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { validate } from './auc';
import { loadDataset, splitIdentities } from './data';
import { loadModel } from './model';
import { exportSidecar } from './sidecar';
import { train } from './train';
import { defaultNetSpec, defaultTrainSpec, NetSpec, TrainSpec } from './types';

function netFromArgs(argv: Record<string, unknown>): NetSpec {
  const spec = { ...defaultNetSpec };
  if (argv.inputHeight) spec.inputHeight = Number(argv.inputHeight);
  if (argv.inputWidth) spec.inputWidth = Number(argv.inputWidth);
  if (argv.channels) {
    spec.backboneChannels = String(argv.channels).split(',').map(Number);
  }
  return spec;
}

async function cmdTrain(argv: Record<string, unknown>): Promise<void> {
  const net = netFromArgs(argv);
  const spec: TrainSpec = {
    ...defaultTrainSpec,
    iterations: Number(argv.iterations ?? defaultTrainSpec.iterations),
    identitiesPerBatch: Number(argv.identitiesPerBatch ?? defaultTrainSpec.identitiesPerBatch),
    imagesPerIdentity: Number(argv.imagesPerIdentity ?? defaultTrainSpec.imagesPerIdentity),
    margin: Number(argv.margin ?? defaultTrainSpec.margin),
    learningRate: Number(argv.lr ?? defaultTrainSpec.learningRate),
    heldoutFraction: Number(argv.heldout ?? defaultTrainSpec.heldoutFraction),
    seed: Number(argv.seed ?? defaultTrainSpec.seed),
    checkpointEvery: Number(argv.checkpointEvery ?? 0),
  };
  const dataset = loadDataset(String(argv.dataset));
  const { train: trainSet, heldout } = splitIdentities(dataset, spec.heldoutFraction, spec.seed);
  console.log(`training on ${trainSet.identities.length} identities, `
    + `${heldout.identities.length} held out`);
  const result = await train(trainSet, net, spec, { checkpointPath: String(argv.out) });
  const report = validate(result.model, heldout, net);
  console.log(`final loss ${result.lossTrace[result.lossTrace.length - 1].toFixed(5)}, `
    + `held-out AUC ${report.auc.toFixed(4)}`);
  fs.writeFileSync(`${argv.out}.trace.json`, JSON.stringify({
    lossTrace: result.lossTrace, auc: report.auc, net, spec,
  }));
}

async function cmdValidate(argv: Record<string, unknown>): Promise<void> {
  const net = netFromArgs(argv);
  const model = await loadModel(String(argv.model));
  const dataset = loadDataset(String(argv.dataset));
  const report = validate(model, dataset, net, Number(argv.pairs ?? 500),
                          Number(argv.seed ?? 7));
  console.log(`AUC ${report.auc.toFixed(4)} over ${report.scores.positive.length} `
    + 'positive and as many negative pairs');
}

async function cmdExport(argv: Record<string, unknown>): Promise<void> {
  const net = netFromArgs(argv);
  const model = await loadModel(String(argv.model));
  const rows = await exportSidecar(model, net, String(argv.detections),
                                   String(argv.images), String(argv.out));
  console.log(`wrote ${rows} sidecar rows to ${argv.out}`);
}

export async function main(args: string[]): Promise<number> {
  try {
    await yargs(args)
      .command('train', 'train the embedding network', (y) => y
        .option('dataset', { demandOption: true, type: 'string' })
        .option('out', { demandOption: true, type: 'string' })
        .option('iterations', { type: 'number' })
        .option('identities-per-batch', { type: 'number' })
        .option('images-per-identity', { type: 'number' })
        .option('margin', { type: 'number' })
        .option('lr', { type: 'number' })
        .option('heldout', { type: 'number' })
        .option('seed', { type: 'number' })
        .option('checkpoint-every', { type: 'number' })
        .option('input-height', { type: 'number' })
        .option('input-width', { type: 'number' })
        .option('channels', { type: 'string' }), (argv) => cmdTrain(argv))
      .command('validate', 'held-out pair-verification AUC', (y) => y
        .option('model', { demandOption: true, type: 'string' })
        .option('dataset', { demandOption: true, type: 'string' })
        .option('pairs', { type: 'number' })
        .option('seed', { type: 'number' })
        .option('input-height', { type: 'number' })
        .option('input-width', { type: 'number' })
        .option('channels', { type: 'string' }), (argv) => cmdValidate(argv))
      .command('export', 'embed a detection file into a sidecar CSV', (y) => y
        .option('model', { demandOption: true, type: 'string' })
        .option('detections', { demandOption: true, type: 'string' })
        .option('images', { demandOption: true, type: 'string' })
        .option('out', { demandOption: true, type: 'string' })
        .option('input-height', { type: 'number' })
        .option('input-width', { type: 'number' })
        .option('channels', { type: 'string' }), (argv) => cmdExport(argv))
      .demandCommand(1)
      .strict()
      .parseAsync();
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main(hideBin(process.argv)).then((code) => process.exit(code));
}
