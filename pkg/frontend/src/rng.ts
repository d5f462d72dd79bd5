/** Deterministic PRNG (mulberry32) so observation sampling is reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** FNV-1a 64-bit over a string; stable content hash for undo comparisons. */
export function fnv1a64(text: string): string {
  let hi = 0xcbf29ce4, lo = 0x84222325;
  for (let i = 0; i < text.length; i++) {
    lo ^= text.charCodeAt(i) & 0xff;
    // 64-bit multiply by the FNV prime 0x100000001b3 in 16-bit limbs
    const l0 = lo & 0xffff, l1 = lo >>> 16, h0 = hi & 0xffff, h1 = hi >>> 16;
    let c0 = l0 * 0x01b3;
    let c1 = l1 * 0x01b3 + (c0 >>> 16);
    let c2 = h0 * 0x01b3 + l0 * 0x0100 + (c1 >>> 16);
    let c3 = h1 * 0x01b3 + l1 * 0x0100 + (c2 >>> 16);
    lo = (c0 & 0xffff) | ((c1 & 0xffff) << 16);
    hi = (c2 & 0xffff) | ((c3 & 0xffff) << 16);
    lo = lo >>> 0;
    hi = hi >>> 0;
  }
  return hi.toString(16).padStart(8, "0") + lo.toString(16).padStart(8, "0");
}

/** Canonical JSON hash of a particle payload. */
export function particlesHash(points: number[][], flags: number[]): string {
  return fnv1a64(JSON.stringify({ points, flags }));
}
