/** Canvas paint -> sampled point observation for guided generation.
 *
 * Foreground pixels are area-sampled uniformly (one uniform point inside
 * each of `count` chosen pixels, pixels drawn uniformly with replacement),
 * deterministic given the seed. Silhouette mode carries the camera that
 * the paint was made under; pattern mode samples in the pattern plane.
 */
import { MaskBuffer } from "./mask.js";
import { mulberry32 } from "./rng.js";
import { EditRequestBody, EditRequestSchema } from "./schema.js";

export type ObservationMode = "silhouette" | "pattern";

export interface CanvasObservation {
  mode: ObservationMode;
  camera: number[][] | null;
  sampledPoints: Array<[number, number]>;
  pointCount: number;
}

export const MIN_OBSERVATION_POINTS = 16;
export const MAX_OBSERVATION_POINTS = 256;

export function canSubmit(mask: MaskBuffer): boolean {
  return mask.foregroundCount() > 0;
}

export function paintToObservation(
  mask: MaskBuffer,
  mode: ObservationMode,
  count: number,
  seed: number,
  camera: number[][] | null = null,
): CanvasObservation {
  if (count < MIN_OBSERVATION_POINTS || count > MAX_OBSERVATION_POINTS) {
    throw new Error(
      `point count must lie in [${MIN_OBSERVATION_POINTS}, ${MAX_OBSERVATION_POINTS}]`);
  }
  if (mode === "silhouette" && camera === null) {
    throw new Error("silhouette observations need the painting camera");
  }
  const pixels = mask.foregroundPixels();
  if (pixels.length === 0) {
    throw new Error("empty mask: nothing to submit");
  }
  const rand = mulberry32(seed);
  const points: Array<[number, number]> = [];
  if (pixels.length === 1) {
    // Degenerate paint: one point, exactly at the pixel center.
    const [i, j] = pixels[0];
    points.push(mask.pixelToCm(i, j));
  } else {
    for (let k = 0; k < count; k++) {
      const [i, j] = pixels[Math.floor(rand() * pixels.length)];
      const [cx, cy] = mask.pixelToCm(i, j);
      const jx = (rand() - 0.5) * mask.cmPerPixel;
      const jy = (rand() - 0.5) * mask.cmPerPixel;
      points.push([cx + jx, cy + jy]);
    }
  }
  return {
    mode,
    camera: mode === "silhouette" ? camera : null,
    sampledPoints: points,
    pointCount: points.length,
  };
}

export interface EditSettings {
  steps: number;
  stopT: number;
  eta: number | null;
  optN: number | null;
  nPoints: number | null;
  seed: number;
}

export function buildEditRequest(
  observation: CanvasObservation,
  settings: EditSettings,
): EditRequestBody {
  const body: EditRequestBody = {
    task: observation.mode === "silhouette" ? "silhouette" : "pattern_edit",
    observation: {
      dim: 2,
      points: observation.sampledPoints.map((p) => [p[0], p[1]]),
    },
    camera: observation.camera,
    cond: null,
    hyper: {
      steps: settings.steps,
      stop_t: settings.stopT,
      eta: settings.eta,
      opt_n: settings.optN,
      n_points: settings.nPoints,
      seed: settings.seed,
    },
  };
  return EditRequestSchema.parse(body);
}

export const CAMERA_PRESETS: Record<string, number[][]> = {
  front: [[1, 0], [0, 1], [0, 0]],
  side: [[0, 0], [0, 1], [1, 0]],
  top: [[1, 0], [0, 0], [0, 1]],
};

export function azimuthCamera(deg: number): number[][] {
  const a = (deg * Math.PI) / 180;
  return [[Math.cos(a), 0], [0, 1], [-Math.sin(a), 0]];
}
