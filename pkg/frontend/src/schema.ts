/** Wire formats of the job service, mirrored as zod schemas.
 *
 * The studio never invents numbers: everything rendered comes from these
 * payloads, and every request it produces validates against these schemas
 * before it is sent.
 */
import { z } from "zod";

export const PointSetSchema = z.object({
  dim: z.union([z.literal(2), z.literal(3)]),
  points: z.array(z.array(z.number())).min(1),
}).refine((o) => o.points.every((p) => p.length === o.dim), {
  message: "point dimensionality must match dim",
});

export const CameraSchema = z
  .array(z.array(z.number()).length(2))
  .length(3);

export const HyperSchema = z.object({
  steps: z.number().int().min(1),
  stop_t: z.number().min(0).max(1),
  eta: z.number().positive().nullable(),
  opt_n: z.number().int().min(0).nullable(),
  n_points: z.number().int().min(1).nullable(),
  seed: z.number().int(),
});

export const EditRequestSchema = z.object({
  task: z.enum([
    "pointcloud_condition",
    "completion",
    "pattern_edit",
    "pattern_completion",
    "silhouette",
  ]),
  observation: PointSetSchema,
  camera: CameraSchema.nullable(),
  cond: z.array(z.number().int()).nullable(),
  hyper: HyperSchema,
}).refine((o) => o.task !== "silhouette" || o.camera !== null, {
  message: "silhouette task requires a camera",
});

export const JobSchema = z.object({
  id: z.string(),
  kind: z.string(),
  status: z.enum(["queued", "running", "done", "failed"]),
  progress: z.number().min(0).max(1),
  error: z.string(),
  result: z.string(),
  trace: z.string(),
});

export const ParticlesSchema = z.object({
  points: z.array(z.array(z.number()).length(5)).min(1),
  flags: z.array(z.number()),
}).refine((o) => o.flags.length === o.points.length, {
  message: "flags must align with points",
});

export type PointSet = z.infer<typeof PointSetSchema>;
export type EditRequestBody = z.infer<typeof EditRequestSchema>;
export type Job = z.infer<typeof JobSchema>;
export type Particles = z.infer<typeof ParticlesSchema>;
