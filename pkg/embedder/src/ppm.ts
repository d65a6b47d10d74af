import * as fs from 'fs';

/** Raw RGB image, values in [0, 255]. */
export interface RawImage {
  width: number;
  height: number;
  data: Uint8Array; // height * width * 3, row-major RGB
}

/** Read a binary PPM (P6) file. This is the image format the embedder
 * consumes natively; convert other formats upstream. */
export function readPpm(path: string): RawImage {
  const buf = fs.readFileSync(path);
  let pos = 0;
  const token = () => {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (buf[pos] === 0x23) { // comment
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      return token();
    }
    const start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    return buf.toString('ascii', start, pos);
  };
  const magic = token();
  if (magic !== 'P6') throw new Error(`not a P6 ppm file: ${path}`);
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0) || maxval !== 255) {
    throw new Error(`unsupported ppm header in ${path}`);
  }
  pos++; // single whitespace after maxval
  const expected = width * height * 3;
  const data = new Uint8Array(buf.subarray(pos, pos + expected));
  if (data.length !== expected) throw new Error(`truncated ppm: ${path}`);
  return { width, height, data };
}

export function writePpm(path: string, image: RawImage): void {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, 'ascii');
  fs.writeFileSync(path, Buffer.concat([header, Buffer.from(image.data)]));
}
