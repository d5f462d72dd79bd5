/** Editing-session state machine.
 *
 * Each accepted result becomes the base for the next edit; the history
 * stack stores job ids and result hashes so undo restores an exact prior
 * state (hash-checked). At most one edit job is in flight per session, and
 * the session can be resumed from persisted job ids after a reload.
 */
import { StudioApi } from "./api.js";
import { CanvasObservation, EditSettings, buildEditRequest } from "./observation.js";
import { particlesHash } from "./rng.js";
import { Particles } from "./schema.js";

export interface HistoryEntry {
  jobId: string;
  kind: "generate" | "edit";
  particles: Particles;
  hash: string;
}

export type SessionListener = (session: StudioSession) => void;

export class StudioSession {
  readonly history: HistoryEntry[] = [];
  cursor = -1;
  busy = false;
  progress = 0;
  lastError = "";
  private listeners: SessionListener[] = [];

  constructor(readonly api: StudioApi) {}

  onChange(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this);
  }

  get current(): HistoryEntry | null {
    return this.cursor >= 0 ? this.history[this.cursor] : null;
  }

  private push(entry: HistoryEntry): void {
    // A new result truncates any redo tail.
    this.history.splice(this.cursor + 1);
    this.history.push(entry);
    this.cursor = this.history.length - 1;
  }

  private async runJob(
    kind: "generate" | "edit",
    submit: () => Promise<{ id: string }>,
  ): Promise<HistoryEntry> {
    if (this.busy) throw new Error("an edit job is already in flight");
    this.busy = true;
    this.progress = 0;
    this.lastError = "";
    this.emit();
    try {
      const job = await submit();
      await this.api.pollJob(job.id, (p) => {
        this.progress = p;
        this.emit();
      });
      const particles = await this.api.result(job.id);
      const entry: HistoryEntry = {
        jobId: job.id,
        kind,
        particles,
        hash: particlesHash(particles.points, particles.flags),
      };
      this.push(entry);
      return entry;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    } finally {
      this.busy = false;
      this.progress = this.lastError ? this.progress : 1;
      this.emit();
    }
  }

  generate(n: number, steps: number, seed: number): Promise<HistoryEntry> {
    return this.runJob("generate", () =>
      this.api.generate({ n, steps, seed, cond: null }));
  }

  submitEdit(
    observation: CanvasObservation,
    settings: EditSettings,
  ): Promise<HistoryEntry> {
    const body = buildEditRequest(observation, settings);
    return this.runJob("edit", () => this.api.edit(body));
  }

  /** Restore an earlier state exactly; returns its hash for verification. */
  undoTo(index: number): HistoryEntry {
    if (index < 0 || index >= this.history.length) {
      throw new Error("history index out of range");
    }
    this.cursor = index;
    this.emit();
    return this.history[index];
  }

  undo(): HistoryEntry {
    if (this.cursor <= 0) throw new Error("nothing to undo");
    return this.undoTo(this.cursor - 1);
  }

  /** Resume a session from persisted job ids (e.g. after a page reload). */
  async resume(jobIds: string[]): Promise<void> {
    for (const id of jobIds) {
      const job = await this.api.job(id);
      if (job.status !== "done") continue;
      const particles = await this.api.result(id);
      this.push({
        jobId: id,
        kind: job.kind === "edit" ? "edit" : "generate",
        particles,
        hash: particlesHash(particles.points, particles.flags),
      });
    }
    this.emit();
  }
}
