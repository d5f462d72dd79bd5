import { describe, expect, it } from "vitest";

import { MaskBuffer } from "../src/mask.js";
import {
  CAMERA_PRESETS,
  azimuthCamera,
  buildEditRequest,
  canSubmit,
  paintToObservation,
} from "../src/observation.js";
import { EditRequestSchema } from "../src/schema.js";

const SETTINGS = {
  steps: 100,
  stopT: 0.6,
  eta: null,
  optN: 2,
  nPoints: 96,
  seed: 7,
};

describe("paintToObservation", () => {
  it("covers a full canvas uniformly (chi-square, p > 0.01)", () => {
    const mask = new MaskBuffer(40, 40, 1.0);
    mask.fill();
    const obs = paintToObservation(mask, "pattern", 256, 42);
    expect(obs.sampledPoints).toHaveLength(256);
    // bin into a 4x4 grid over the canvas extent
    const bins = new Array(16).fill(0);
    for (const [x, y] of obs.sampledPoints) {
      const bx = Math.min(3, Math.floor(((x + 20) / 40) * 4));
      const by = Math.min(3, Math.floor(((y + 20) / 40) * 4));
      expect(bx).toBeGreaterThanOrEqual(0);
      expect(by).toBeGreaterThanOrEqual(0);
      bins[by * 4 + bx]++;
    }
    const expected = 256 / 16;
    const chi2 = bins.reduce((acc, n) => acc + ((n - expected) ** 2) / expected, 0);
    // chi-square critical value at p = 0.01 with 15 degrees of freedom
    expect(chi2).toBeLessThan(30.578);
  });

  it("is deterministic given the seed", () => {
    const mask = new MaskBuffer(24, 24, 0.5);
    mask.stamp(12, 12, 8, 1);
    const a = paintToObservation(mask, "pattern", 32, 9);
    const b = paintToObservation(mask, "pattern", 32, 9);
    expect(a.sampledPoints).toEqual(b.sampledPoints);
    const c = paintToObservation(mask, "pattern", 32, 10);
    expect(c.sampledPoints).not.toEqual(a.sampledPoints);
  });

  it("returns exactly the pixel center for a single painted pixel", () => {
    const mask = new MaskBuffer(21, 21, 2.0);
    mask.data[10 * 21 + 5] = 1; // pixel (5, 10)
    const obs = paintToObservation(mask, "pattern", 64, 0);
    expect(obs.sampledPoints).toHaveLength(1);
    const [x, y] = obs.sampledPoints[0];
    expect(x).toBeCloseTo((5 + 0.5 - 10.5) * 2.0, 12);
    expect(y).toBeCloseTo((10.5 - 10 - 0.5) * 2.0, 12);
  });

  it("keeps samples inside the painted foreground", () => {
    const mask = new MaskBuffer(30, 30, 1.0);
    mask.stamp(8, 8, 5, 1);
    const obs = paintToObservation(mask, "pattern", 64, 3);
    for (const [x, y] of obs.sampledPoints) {
      const [i, j] = mask.cmToPixel(x, y);
      expect(mask.get(Math.round(i), Math.round(j))).toBe(true);
    }
  });

  it("rejects empty masks and disables submit", () => {
    const mask = new MaskBuffer(10, 10, 1.0);
    expect(canSubmit(mask)).toBe(false);
    expect(() => paintToObservation(mask, "pattern", 32, 0)).toThrow(/empty/);
    mask.stamp(5, 5, 2, 1);
    expect(canSubmit(mask)).toBe(true);
    mask.stamp(5, 5, 12, 0); // erase all
    expect(canSubmit(mask)).toBe(false);
  });

  it("bounds the user point count", () => {
    const mask = new MaskBuffer(10, 10, 1.0);
    mask.fill();
    expect(() => paintToObservation(mask, "pattern", 8, 0)).toThrow(/point count/);
    expect(() => paintToObservation(mask, "pattern", 1000, 0)).toThrow(/point count/);
  });

  it("requires a camera in silhouette mode", () => {
    const mask = new MaskBuffer(10, 10, 1.0);
    mask.fill();
    expect(() => paintToObservation(mask, "silhouette", 32, 0)).toThrow(/camera/);
    const obs = paintToObservation(
      mask, "silhouette", 32, 0, CAMERA_PRESETS.front);
    expect(obs.camera).toEqual([[1, 0], [0, 1], [0, 0]]);
  });
});

describe("buildEditRequest", () => {
  it("produces schema-valid silhouette requests", () => {
    const mask = new MaskBuffer(20, 20, 1.0);
    mask.stamp(10, 10, 6, 1);
    const obs = paintToObservation(
      mask, "silhouette", 48, 1, azimuthCamera(30));
    const body = buildEditRequest(obs, SETTINGS);
    expect(() => EditRequestSchema.parse(body)).not.toThrow();
    expect(body.task).toBe("silhouette");
    expect(body.observation.dim).toBe(2);
    expect(body.observation.points).toHaveLength(48);
    expect(body.hyper.opt_n).toBe(2);
  });

  it("produces schema-valid pattern requests without a camera", () => {
    const mask = new MaskBuffer(20, 20, 1.0);
    mask.stamp(10, 10, 6, 1);
    const obs = paintToObservation(mask, "pattern", 32, 1);
    const body = buildEditRequest(obs, SETTINGS);
    expect(body.task).toBe("pattern_edit");
    expect(body.camera).toBeNull();
    expect(() => EditRequestSchema.parse(body)).not.toThrow();
  });

  it("schema rejects a silhouette request without camera", () => {
    expect(() =>
      EditRequestSchema.parse({
        task: "silhouette",
        observation: { dim: 2, points: [[0, 0]] },
        camera: null,
        cond: null,
        hyper: { steps: 10, stop_t: 0.5, eta: null, opt_n: 1, n_points: null, seed: 0 },
      }),
    ).toThrow();
  });
});
