/** B2: the session loop against a live job service.
 *
 * Builds a small dataset + model through the CLI, starts the real HTTP
 * service, and drives it through the same client the studio uses.
 */
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { StudioApi } from "../src/api.js";
import { MaskBuffer, maskIoU } from "../src/mask.js";
import { CAMERA_PRESETS, paintToObservation } from "../src/observation.js";
import { StudioSession } from "../src/session.js";

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;
const CANVAS = 96;
const CM_PER_PIXEL = 2.0;
const BRUSH_PX = 4;

const cliAvailable = spawnSync("garmentflow", ["--help"]).status === 0;
const describeLive = cliAvailable ? describe : describe.skip;

let server: ChildProcess | null = null;
let workdir = "";
let datasetSilhouette: Array<[number, number]> = [];

function runCli(args: string[]): void {
  const proc = spawnSync("garmentflow", args, { encoding: "utf-8" });
  if (proc.status !== 0) {
    throw new Error(`garmentflow ${args.join(" ")} failed: ${proc.stderr}`);
  }
}

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const t0 = Date.now();
  for (;;) {
    try {
      const resp = await fetch(`${BASE}/health`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() - t0 > timeoutMs) throw new Error("service never came up");
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

describeLive("studio against a live service", () => {
  beforeAll(async () => {
    workdir = mkdtempSync(join(tmpdir(), "studio-"));
    const dataset = join(workdir, "dataset");
    const model = join(workdir, "model.npz");
    runCli(["dataset", "gen", "--out", dataset, "--n", "8", "--seed", "11",
            "--area-per-point", "100"]);
    runCli(["train", "--dataset", dataset, "--out", model,
            "--iters", "700", "--width", "64", "--depth", "2", "--seed", "0"]);
    // silhouette of one dataset garment, used to paint the fixture mask
    const manifest = JSON.parse(
      readFileSync(join(dataset, "manifest.json"), "utf-8"));
    const kept = manifest.samples.find((s: any) => !s.filtered);
    const particles = JSON.parse(readFileSync(
      join(dataset, kept.path, "particles.json"), "utf-8"));
    datasetSilhouette = particles.points.map(
      (p: number[]) => [p[2], p[3]] as [number, number]);

    const config = join(workdir, "service.json");
    writeFileSync(config, JSON.stringify({
      data_dir: join(workdir, "svc"),
      model,
      queue_limit: 4,
    }));
    server = spawn("garmentflow",
                   ["serve", "--port", String(PORT), "--config", config],
                   { stdio: "ignore" });
    await waitForHealth();
  }, 600_000);

  afterAll(() => {
    server?.kill();
  });

  it("opt_n = 0 edit result hash equals the /generate hash", async () => {
    const api = new StudioApi(BASE);
    const session = new StudioSession(api);
    await session.generate(64, 60, 7);
    const generated = session.current!;

    const mask = new MaskBuffer(CANVAS, CANVAS, CM_PER_PIXEL);
    mask.stamp(CANVAS / 2, CANVAS / 2, 20, 1);
    const observation = paintToObservation(
      mask, "silhouette", 64, 7, CAMERA_PRESETS.front);
    await session.submitEdit(observation, {
      steps: 60, stopT: 0.6, eta: null, optN: 0, nPoints: 64, seed: 7,
    });
    expect(session.current!.hash).toBe(generated.hash);
  }, 300_000);

  it("undo restores the exact prior particles", async () => {
    const api = new StudioApi(BASE);
    const session = new StudioSession(api);
    await session.generate(48, 60, 3);
    const original = session.current!;

    const mask = new MaskBuffer(CANVAS, CANVAS, CM_PER_PIXEL);
    mask.stamp(CANVAS / 2, CANVAS / 2, 16, 1);
    const observation = paintToObservation(
      mask, "pattern", 48, 3);
    await session.submitEdit(observation, {
      steps: 80, stopT: 0.7, eta: null, optN: 2, nPoints: 48, seed: 4,
    });
    expect(session.current!.hash).not.toBe(original.hash);
    const restored = session.undo();
    expect(restored.hash).toBe(original.hash);
    expect(restored.particles.points).toEqual(original.particles.points);
  }, 300_000);

  it("silhouette-guided result overlays the painted mask (IoU >= 0.5)", async () => {
    const api = new StudioApi(BASE);
    const session = new StudioSession(api);

    // paint the mask by stamping a real garment silhouette
    const mask = MaskBuffer.fromPoints(
      datasetSilhouette, CANVAS, CANVAS, CM_PER_PIXEL, BRUSH_PX);
    expect(mask.foregroundCount()).toBeGreaterThan(50);
    const observation = paintToObservation(
      mask, "silhouette", 128, 5, CAMERA_PRESETS.front);
    await session.submitEdit(observation, {
      steps: 200, stopT: 0.85, eta: 0.1, optN: 4,
      nPoints: datasetSilhouette.length, seed: 5,
    });
    const result = session.current!.particles;
    const resultSilhouette = result.points.map(
      (p) => [p[2], p[3]] as [number, number]);
    const overlay = MaskBuffer.fromPoints(
      resultSilhouette, CANVAS, CANVAS, CM_PER_PIXEL, BRUSH_PX);
    const iou = maskIoU(mask, overlay);
    expect(iou).toBeGreaterThanOrEqual(0.5);
  }, 300_000);

  it("progress polled from a running job is monotone", async () => {
    const api = new StudioApi(BASE);
    const job = await api.generate({ n: 64, steps: 220, seed: 1 });
    const seen: number[] = [];
    await api.pollJob(job.id, (p) => seen.push(p), 100);
    const sorted = [...seen].sort((a, b) => a - b);
    expect(seen).toEqual(sorted);
    expect(seen[seen.length - 1]).toBe(1);
  }, 300_000);
});
