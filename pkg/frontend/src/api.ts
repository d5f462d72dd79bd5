/** Typed client for the job service; all payloads validate against schema.ts. */
import {
  EditRequestBody,
  Job,
  JobSchema,
  Particles,
  ParticlesSchema,
} from "./schema.js";

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(
  base: string,
  path: string,
  init?: RequestInit,
): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      detail = body.detail ?? detail;
    } catch {
      /* non-json error body */
    }
    throw new ServiceError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class StudioApi {
  constructor(readonly base: string) {}

  health(): Promise<{ status: string }> {
    return request(this.base, "/health");
  }

  async generate(body: {
    n: number;
    steps?: number;
    seed?: number;
    cond?: number[] | null;
  }): Promise<Job> {
    return JobSchema.parse(await request(this.base, "/generate", {
      method: "POST",
      body: JSON.stringify(body),
    }));
  }

  async edit(body: EditRequestBody): Promise<Job> {
    return JobSchema.parse(await request(this.base, "/edit", {
      method: "POST",
      body: JSON.stringify(body),
    }));
  }

  async job(id: string): Promise<Job> {
    return JobSchema.parse(await request(this.base, `/jobs/${id}`));
  }

  async result(id: string): Promise<Particles> {
    return ParticlesSchema.parse(await request(this.base, `/jobs/${id}/result`));
  }

  /** Poll until the job finishes; reports progress along the way. */
  async pollJob(
    id: string,
    onProgress?: (p: number) => void,
    intervalMs = 500,
    timeoutMs = 600_000,
  ): Promise<Job> {
    const t0 = Date.now();
    for (;;) {
      const job = await this.job(id);
      onProgress?.(job.progress);
      if (job.status === "done") return job;
      if (job.status === "failed") {
        throw new ServiceError(500, `job ${id} failed: ${job.error}`);
      }
      if (Date.now() - t0 > timeoutMs) {
        throw new ServiceError(408, `job ${id} timed out`);
      }
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
