import { z } from "zod";

export const QuestionAlternative = z.object({
  index: z.number().int(),
  id: z.string(),
  performances: z.array(z.number()),
});

export const Question = z.object({
  pair: z.tuple([z.number().int(), z.number().int()]),
  alternatives: z.array(QuestionAlternative).length(2),
});

export const MetricsPoint = z.object({
  round: z.number().int(),
  f_var: z.number(),
  f_pwi: z.number(),
  f_rai: z.number(),
});

export const Posterior = z.object({
  theta: z.array(z.number()),
  mean: z.array(z.number()),
  f_var: z.number(),
});

export const SessionStatus = z.enum([
  "awaiting_answer",
  "fitting",
  "selecting",
  "done",
]);

export const SessionView = z.object({
  id: z.string(),
  status: SessionStatus,
  round: z.number().int(),
  horizon: z.number().int(),
  question: Question.nullable(),
  history: z.array(z.tuple([z.number().int(), z.number().int()])),
  criteria: z.array(z.string()),
  alternative_ids: z.array(z.string()),
  posterior: Posterior.nullable(),
  metrics: z.array(MetricsPoint),
  pwi: z.array(z.array(z.number())).nullable(),
  rai: z.array(z.array(z.number())).nullable(),
});

export const SessionExport = z.object({
  id: z.string(),
  horizon: z.number().int(),
  statements: z.array(z.tuple([z.number().int(), z.number().int()])),
  theta: z.array(z.number()).nullable(),
  seed: z.number().int(),
  metrics: z.array(MetricsPoint),
});

export type QuestionAlternative = z.infer<typeof QuestionAlternative>;
export type Question = z.infer<typeof Question>;
export type MetricsPoint = z.infer<typeof MetricsPoint>;
export type SessionStatus = z.infer<typeof SessionStatus>;
export type SessionView = z.infer<typeof SessionView>;
export type SessionExport = z.infer<typeof SessionExport>;

export interface CriterionSpec {
  name: string;
  scale_min: number;
  scale_max: number;
  subintervals: number;
}

export interface TableSpec {
  alternatives: string[];
  criteria: CriterionSpec[];
  performances: number[][];
}

export interface SessionConfig {
  mcts_budget?: number;
  fit_iters?: number;
  fit_samples?: number;
  metric_samples?: number;
  async_fit?: boolean;
  seed?: number;
}

export interface CreateSessionRequest {
  table?: TableSpec;
  horizon: number;
  config?: SessionConfig;
}
