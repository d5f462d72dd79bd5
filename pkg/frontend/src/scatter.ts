/** Point-scatter views: pattern plane (2D) and orbitable drape view (3D).
 *
 * The 3D view projects points with an azimuth/elevation orbit camera onto
 * the canvas; the representation is a point cloud, so scatter is the
 * native rendering. Projection math is pure and unit-tested; drawing
 * touches the canvas only.
 */

export interface OrbitState {
  azimuthDeg: number;
  elevationDeg: number;
  zoom: number;
}

/** Rotate then drop depth: returns (N, 2) screen-plane coords plus depth. */
export function projectOrbit(
  points: Array<[number, number, number]>,
  orbit: OrbitState,
): Array<[number, number, number]> {
  const az = (orbit.azimuthDeg * Math.PI) / 180;
  const el = (orbit.elevationDeg * Math.PI) / 180;
  const ca = Math.cos(az), sa = Math.sin(az);
  const ce = Math.cos(el), se = Math.sin(el);
  return points.map(([x, y, z]) => {
    // yaw about the y axis, then pitch about the screen x axis
    const x1 = ca * x - sa * z;
    const z1 = sa * x + ca * z;
    const y2 = ce * y - se * z1;
    const z2 = se * y + ce * z1;
    return [x1 * orbit.zoom, y2 * orbit.zoom, z2];
  });
}

export interface Bounds {
  cx: number;
  cy: number;
  halfSpan: number;
}

export function bounds2d(points: Array<[number, number]>): Bounds {
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const [x, y] of points) {
    xmin = Math.min(xmin, x);
    xmax = Math.max(xmax, x);
    ymin = Math.min(ymin, y);
    ymax = Math.max(ymax, y);
  }
  return {
    cx: (xmin + xmax) / 2,
    cy: (ymin + ymax) / 2,
    halfSpan: Math.max(xmax - xmin, ymax - ymin, 1e-6) / 2,
  };
}

export function toCanvas(
  p: [number, number],
  b: Bounds,
  width: number,
  height: number,
  margin = 12,
): [number, number] {
  const scale = (Math.min(width, height) / 2 - margin) / b.halfSpan;
  return [
    width / 2 + (p[0] - b.cx) * scale,
    height / 2 - (p[1] - b.cy) * scale,
  ];
}

export function drawScatter(
  ctx: CanvasRenderingContext2D,
  points: Array<[number, number]>,
  colors: string[] | string,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (points.length === 0) return;
  const b = bounds2d(points);
  points.forEach((p, idx) => {
    const [cx, cy] = toCanvas(p, b, width, height);
    ctx.fillStyle = typeof colors === "string" ? colors : colors[idx];
    ctx.beginPath();
    ctx.arc(cx, cy, 2.2, 0, 2 * Math.PI);
    ctx.fill();
  });
}

/** Boundary points draw darker so panel outlines read at a glance. */
export function flagColors(flags: number[]): string[] {
  return flags.map((f) => (f > 0.5 ? "#1a275f" : "#7f9cf5"));
}
