import { describe, expect, it } from "vitest";

import { MaskBuffer } from "../src/mask.js";
import { maskIoU } from "../src/mask.js";
import { paintToObservation } from "../src/observation.js";
import { particlesHash } from "../src/rng.js";
import { bounds2d, projectOrbit, toCanvas } from "../src/scatter.js";
import { StudioSession } from "../src/session.js";
import type { Job, Particles } from "../src/schema.js";

/** In-memory stand-in for the job service: deterministic per seed. */
class FakeApi {
  jobs = new Map<string, { job: Job; particles: Particles }>();
  counter = 0;

  private makeParticles(seed: number, n = 6): Particles {
    const points: number[][] = [];
    const flags: number[] = [];
    for (let i = 0; i < n; i++) {
      points.push([seed + i, seed - i, i, -i, seed * 0.5]);
      flags.push(i % 2);
    }
    return { points, flags };
  }

  private startJob(kind: string, seed: number): Job {
    const id = `job${this.counter++}`;
    const job: Job = {
      id, kind, status: "done", progress: 1, error: "",
      result: `/jobs/${id}/result`, trace: `/jobs/${id}/trace`,
    };
    this.jobs.set(id, { job, particles: this.makeParticles(seed) });
    return job;
  }

  async generate(body: { n: number; seed?: number }): Promise<Job> {
    return this.startJob("generate", body.seed ?? 0);
  }

  async edit(body: { hyper: { seed: number; opt_n: number | null } }): Promise<Job> {
    // opt_n = 0 behaves exactly like generate for the same seed
    return this.startJob(
      body.hyper.opt_n === 0 ? "generate" : "edit", body.hyper.seed);
  }

  async job(id: string): Promise<Job> {
    const found = this.jobs.get(id);
    if (!found) throw new Error("unknown job");
    return found.job;
  }

  async result(id: string): Promise<Particles> {
    const found = this.jobs.get(id);
    if (!found) throw new Error("unknown job");
    return found.particles;
  }

  async pollJob(id: string, onProgress?: (p: number) => void): Promise<Job> {
    onProgress?.(1);
    return this.job(id);
  }
}

function observation() {
  const mask = new MaskBuffer(16, 16, 1.0);
  mask.stamp(8, 8, 5, 1);
  return paintToObservation(mask, "pattern", 24, 3);
}

const SETTINGS = {
  steps: 10, stopT: 0.5, eta: null, optN: 2, nPoints: 24, seed: 5,
};

describe("StudioSession", () => {
  it("chains edits and exposes the newest result", async () => {
    const api = new FakeApi();
    const session = new StudioSession(api as any);
    await session.generate(24, 10, 1);
    const first = session.current!;
    await session.submitEdit(observation(), SETTINGS);
    expect(session.history).toHaveLength(2);
    expect(session.current!.jobId).not.toBe(first.jobId);
  });

  it("opt_n = 0 edit result hashes equal to a generate with the same seed", async () => {
    const api = new FakeApi();
    const session = new StudioSession(api as any);
    await session.generate(24, 10, 5);
    const genHash = session.current!.hash;
    await session.submitEdit(observation(), { ...SETTINGS, optN: 0 });
    expect(session.current!.hash).toBe(genHash);
  });

  it("undo restores the exact prior particles (hash equality)", async () => {
    const api = new FakeApi();
    const session = new StudioSession(api as any);
    await session.generate(24, 10, 1);
    const original = session.current!;
    await session.submitEdit(observation(), SETTINGS);
    expect(session.current!.hash).not.toBe(original.hash);
    const restored = session.undo();
    expect(restored.hash).toBe(original.hash);
    expect(restored.particles.points).toEqual(original.particles.points);
  });

  it("resume rebuilds history from persisted job ids", async () => {
    const api = new FakeApi();
    const first = new StudioSession(api as any);
    await first.generate(24, 10, 2);
    await first.submitEdit(observation(), SETTINGS);
    const ids = first.history.map((h) => h.jobId);

    const second = new StudioSession(api as any);
    await second.resume(ids);
    expect(second.history.map((h) => h.hash)).toEqual(
      first.history.map((h) => h.hash));
  });

  it("rejects concurrent submissions", async () => {
    const api = new FakeApi();
    const slowPoll = api.pollJob.bind(api);
    api.pollJob = async (id, onProgress) => {
      await new Promise((resolve) => setTimeout(resolve, 40));
      return slowPoll(id, onProgress);
    };
    const session = new StudioSession(api as any);
    const running = session.generate(24, 10, 1);
    await expect(session.generate(24, 10, 2)).rejects.toThrow(/in flight/);
    await running;
  });
});

describe("hash and scatter helpers", () => {
  it("particle hash is order sensitive and stable", () => {
    const h1 = particlesHash([[1, 2, 3, 4, 5]], [1]);
    const h2 = particlesHash([[1, 2, 3, 4, 5]], [1]);
    const h3 = particlesHash([[1, 2, 3, 4, 6]], [1]);
    expect(h1).toBe(h2);
    expect(h1).not.toBe(h3);
    expect(h1).toMatch(/^[0-9a-f]{16}$/);
  });

  it("orbit projection at zero angles drops depth", () => {
    const out = projectOrbit([[1, 2, 3]], { azimuthDeg: 0, elevationDeg: 0, zoom: 1 });
    expect(out[0][0]).toBeCloseTo(1, 12);
    expect(out[0][1]).toBeCloseTo(2, 12);
  });

  it("azimuth 90 shows the z axis", () => {
    const out = projectOrbit([[0, 0, 5]], { azimuthDeg: 90, elevationDeg: 0, zoom: 1 });
    expect(out[0][0]).toBeCloseTo(-5, 10);
  });

  it("canvas mapping centers the data", () => {
    const pts: Array<[number, number]> = [[-10, -10], [10, 10]];
    const b = bounds2d(pts);
    const [cx, cy] = toCanvas([0, 0], b, 100, 100);
    expect(cx).toBeCloseTo(50, 9);
    expect(cy).toBeCloseTo(50, 9);
  });

  it("mask IoU agrees on hand cases", () => {
    const a = new MaskBuffer(10, 10, 1);
    const b = new MaskBuffer(10, 10, 1);
    a.fill();
    expect(maskIoU(a, b)).toBe(0);
    b.fill();
    expect(maskIoU(a, b)).toBe(1);
  });
});
