/** Binary paint raster with a physical scale.
 *
 * The canvas maps pixel (i, j) to centimeters: x = (i + 0.5 - w/2) * cmPerPixel,
 * y = (h/2 - j - 0.5) * cmPerPixel (y up). Painting and erasing stamp
 * filled discs; the foreground set is what observation sampling consumes.
 */
export class MaskBuffer {
  readonly width: number;
  readonly height: number;
  readonly cmPerPixel: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, cmPerPixel: number) {
    if (width < 1 || height < 1 || cmPerPixel <= 0) {
      throw new Error("invalid mask dimensions");
    }
    this.width = width;
    this.height = height;
    this.cmPerPixel = cmPerPixel;
    this.data = new Uint8Array(width * height);
  }

  clone(): MaskBuffer {
    const copy = new MaskBuffer(this.width, this.height, this.cmPerPixel);
    copy.data.set(this.data);
    return copy;
  }

  clear(): void {
    this.data.fill(0);
  }

  fill(): void {
    this.data.fill(1);
  }

  get(i: number, j: number): boolean {
    return this.data[j * this.width + i] === 1;
  }

  /** Stamp a disc of `radius` pixels; value 1 paints, 0 erases. */
  stamp(ci: number, cj: number, radius: number, value: 0 | 1): void {
    const r2 = radius * radius;
    const i0 = Math.max(0, Math.floor(ci - radius));
    const i1 = Math.min(this.width - 1, Math.ceil(ci + radius));
    const j0 = Math.max(0, Math.floor(cj - radius));
    const j1 = Math.min(this.height - 1, Math.ceil(cj + radius));
    for (let j = j0; j <= j1; j++) {
      for (let i = i0; i <= i1; i++) {
        const dx = i - ci;
        const dy = j - cj;
        if (dx * dx + dy * dy <= r2) {
          this.data[j * this.width + i] = value;
        }
      }
    }
  }

  foregroundCount(): number {
    let n = 0;
    for (const v of this.data) n += v;
    return n;
  }

  foregroundPixels(): Array<[number, number]> {
    const out: Array<[number, number]> = [];
    for (let j = 0; j < this.height; j++) {
      for (let i = 0; i < this.width; i++) {
        if (this.data[j * this.width + i] === 1) out.push([i, j]);
      }
    }
    return out;
  }

  /** Center of pixel (i, j) in centimeters. */
  pixelToCm(i: number, j: number): [number, number] {
    const x = (i + 0.5 - this.width / 2) * this.cmPerPixel;
    const y = (this.height / 2 - j - 0.5) * this.cmPerPixel;
    return [x, y];
  }

  cmToPixel(x: number, y: number): [number, number] {
    const i = x / this.cmPerPixel - 0.5 + this.width / 2;
    const j = this.height / 2 - 0.5 - y / this.cmPerPixel;
    return [i, j];
  }

  /** Stamp a set of cm-space points with a disc brush (used for overlays). */
  static fromPoints(
    points: Array<[number, number]>,
    width: number,
    height: number,
    cmPerPixel: number,
    brushPx: number,
  ): MaskBuffer {
    const mask = new MaskBuffer(width, height, cmPerPixel);
    for (const [x, y] of points) {
      const [i, j] = mask.cmToPixel(x, y);
      mask.stamp(i, j, brushPx, 1);
    }
    return mask;
  }
}

/** Intersection-over-union of two same-shape masks. */
export function maskIoU(a: MaskBuffer, b: MaskBuffer): number {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error("mask shapes differ");
  }
  let inter = 0;
  let union = 0;
  for (let k = 0; k < a.data.length; k++) {
    const x = a.data[k] === 1;
    const y = b.data[k] === 1;
    if (x && y) inter++;
    if (x || y) union++;
  }
  return union === 0 ? 0 : inter / union;
}
