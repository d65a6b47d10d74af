import * as tf from '@tensorflow/tfjs';
import * as fs from 'fs';
import * as path from 'path';

import { imageToTensor } from './data';
import { embedBatch } from './model';
import { readPpm, RawImage } from './ppm';
import { NetSpec } from './types';

export interface DetectionRow {
  frame: number;
  index: number; // 0-based position among the frame's rows, file order
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Parse a MOT detection file, keeping every row (the sidecar contract is
 * one output row per input row, in file order). */
export function parseDetections(file: string): DetectionRow[] {
  const rows: DetectionRow[] = [];
  const counters = new Map<number, number>();
  const lines = fs.readFileSync(file, 'utf8').split('\n');
  lines.forEach((line, lineno) => {
    const text = line.trim();
    if (!text) return;
    const parts = text.split(',').map(Number);
    if (parts.length < 7 || parts.some((v, i) => i < 7 && Number.isNaN(v))) {
      throw new Error(`detections line ${lineno + 1}: malformed row`);
    }
    const frame = parts[0];
    const index = counters.get(frame) ?? 0;
    counters.set(frame, index + 1);
    rows.push({ frame, index, x: parts[2], y: parts[3], w: parts[4], h: parts[5] });
  });
  return rows;
}

/** Locate the image for a frame: <frame>.ppm or zero-padded 000001.ppm. */
export function frameImagePath(imageDir: string, frame: number): string {
  const candidates = [
    path.join(imageDir, `${frame}.ppm`),
    path.join(imageDir, `${String(frame).padStart(6, '0')}.ppm`),
  ];
  for (const c of candidates) {
    if (fs.existsSync(c)) return c;
  }
  throw new Error(`no image for frame ${frame} in ${imageDir}`);
}

/** Crop a detection box (clipped to image bounds) and resize to the net's
 * input. A box that clips to zero area is an error, not a zero row. */
export function cropBox(image: RawImage, row: DetectionRow, net: NetSpec): tf.Tensor3D {
  const x0 = Math.max(0, Math.floor(row.x));
  const y0 = Math.max(0, Math.floor(row.y));
  const x1 = Math.min(image.width, Math.ceil(row.x + row.w));
  const y1 = Math.min(image.height, Math.ceil(row.y + row.h));
  if (x1 - x0 < 1 || y1 - y0 < 1) {
    throw new Error(`degenerate crop: frame ${row.frame} detection ${row.index}`);
  }
  return tf.tidy(() => {
    const full = tf.tensor3d(image.data, [image.height, image.width, 3], 'int32')
      .toFloat().div(255) as tf.Tensor3D;
    const crop = full.slice([y0, x0, 0], [y1 - y0, x1 - x0, 3]);
    return tf.image.resizeBilinear(crop, [net.inputHeight, net.inputWidth]);
  });
}

/** Embed every detection row and write the sidecar CSV
 * (frame,det_index,v1..v128), exactly one row per detection row. */
export async function exportSidecar(model: tf.LayersModel, net: NetSpec,
                                    detectionFile: string, imageDir: string,
                                    outPath: string, batchLimit = 64): Promise<number> {
  const rows = parseDetections(detectionFile);
  const images = new Map<number, RawImage>();
  const lines: string[] = [];
  for (let start = 0; start < rows.length; start += batchLimit) {
    const chunk = rows.slice(start, start + batchLimit);
    const crops = chunk.map((row) => {
      if (!images.has(row.frame)) {
        images.set(row.frame, readPpm(frameImagePath(imageDir, row.frame)));
      }
      return cropBox(images.get(row.frame)!, row, net);
    });
    const batch = tf.stack(crops) as tf.Tensor4D;
    crops.forEach((c) => c.dispose());
    const embeddings = embedBatch(model, batch);
    const values = embeddings.arraySync() as number[][];
    batch.dispose();
    embeddings.dispose();
    chunk.forEach((row, i) => {
      const vec = values[i].map((v) => v.toPrecision(9)).join(',');
      lines.push(`${row.frame},${row.index},${vec}`);
    });
  }
  fs.writeFileSync(outPath, lines.join('\n') + (lines.length ? '\n' : ''));
  return rows.length;
}
