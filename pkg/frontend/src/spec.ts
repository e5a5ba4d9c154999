/**
 * Declarative description of one figure.
 *
 * Everything configurable lives here (inputs, output path, labels,
 * optional reference rate, pixel size); the renderers take a validated
 * spec and never reach for defaults hidden elsewhere.
 */

import { z } from "zod";

export const PlotSpecSchema = z
  .object({
    kind: z.enum(["convergence", "field_slice", "basis_compare"]),
    input: z.string().min(1),
    output: z.string().min(1),
    title: z.string().optional(),
    xlabel: z.string().optional(),
    ylabel: z.string().optional(),
    /** reference decay rate alpha: overlays C*exp(-alpha*x). */
    rate: z.number().positive().optional(),
    /** which columns to plot as error series (convergence kinds). */
    series: z.array(z.string()).nonempty().optional(),
    logx: z.boolean().default(false),
    width: z.number().int().min(160).max(4000).default(720),
    height: z.number().int().min(120).max(4000).default(520),
  })
  .strict();

export type PlotSpec = z.infer<typeof PlotSpecSchema>;

export function parseSpec(doc: unknown): PlotSpec {
  const res = PlotSpecSchema.safeParse(doc);
  if (!res.success) {
    const issue = res.error.issues[0];
    const where = issue && issue.path.length ? ` at ${issue.path.join(".")}` : "";
    throw new Error(`bad plot spec${where}: ${issue?.message ?? "invalid"}`);
  }
  return res.data;
}
