import type {
  CampaignDoc,
  CriterionPoint,
  PredictionPoint,
  Proposal,
} from "./types.js";

// Pure view assembly: everything here is a deterministic rearrangement of
// service responses. The band is the service's mean +/- sqrt(var) (the 68%
// convention) and the censored-region shading covers exactly the grid cells
// with lambda_point > 0.5; no model quantity is computed client-side.

export interface Marker {
  x: number[];
  value: number;
  censored: boolean;
  fidelity: string;
}

export interface ShadeSegment {
  from: number;
  to: number;
}

export interface CampaignSummary {
  id: string;
  p: number;
  c: number | null;
  status: string;
  observedCount: number;
  censoredCount: number;
}

export interface CampaignView {
  summary: CampaignSummary;
  grid: number[][];
  mean: number[];
  bandLow: number[];
  bandHigh: number[];
  lambda: number[];
  shading: ShadeSegment[];
  criterion: number[];
  markers: Marker[];
  proposal: Proposal | null;
  highCensoringRisk: boolean;
}

export const SHADING_THRESHOLD = 0.5;

export function shadingSegments(
  xs: number[],
  lambda: number[],
  threshold: number = SHADING_THRESHOLD,
): ShadeSegment[] {
  const segments: ShadeSegment[] = [];
  let start: number | null = null;
  for (let i = 0; i < xs.length; i++) {
    const shaded = (lambda[i] ?? 0) > threshold;
    if (shaded && start === null) {
      start = xs[i]!;
    }
    if (!shaded && start !== null) {
      segments.push({ from: start, to: xs[i - 1]! });
      start = null;
    }
  }
  if (start !== null) {
    segments.push({ from: start, to: xs[xs.length - 1]! });
  }
  return segments;
}

export function assembleView(
  campaign: CampaignDoc,
  predictions: PredictionPoint[],
  criterion: CriterionPoint[],
  grid: number[][],
  proposal: Proposal | null,
): CampaignView {
  if (predictions.length !== grid.length) {
    throw new Error("prediction series does not match the requested grid");
  }
  const mean = predictions.map((p) => p.mean);
  const std = predictions.map((p) => Math.sqrt(p.var));
  const lambda = predictions.map((p) => p.lambda_point);
  const markers: Marker[] = campaign.observations.map((o) => ({
    x: o.x,
    value: o.value,
    censored: o.censored,
    fidelity: o.fidelity,
  }));
  const summary: CampaignSummary = {
    id: campaign.id,
    p: campaign.config.p,
    c: campaign.config.c,
    status: campaign.status,
    observedCount: markers.filter((m) => !m.censored).length,
    censoredCount: markers.filter((m) => m.censored).length,
  };
  const xs1d = grid.map((pt) => pt[0]!);
  return {
    summary,
    grid,
    mean,
    bandLow: mean.map((m, i) => m - std[i]!),
    bandHigh: mean.map((m, i) => m + std[i]!),
    lambda,
    shading: campaign.config.c === null ? [] : shadingSegments(xs1d, lambda),
    criterion: criterion.map((c) => c.value),
    markers,
    proposal,
    highCensoringRisk: proposal?.diagnostics.high_censoring_risk ?? false,
  };
}

// ---------------------------------------------------------------------------
// SVG geometry helpers
// ---------------------------------------------------------------------------

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

export function niceDomain(values: number[], padFraction = 0.08): [number, number] {
  const finite = values.filter((v) => Number.isFinite(v));
  if (finite.length === 0) return [0, 1];
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);
  const pad = (hi - lo || 1) * padFraction;
  return [lo - pad, hi + pad];
}

export function linePath(xs: number[], ys: number[], sx: Scale, sy: Scale): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const cmd = i === 0 ? "M" : "L";
    parts.push(`${cmd}${sx(xs[i]!).toFixed(2)},${sy(ys[i]!).toFixed(2)}`);
  }
  return parts.join(" ");
}

export function bandPath(
  xs: number[],
  low: number[],
  high: number[],
  sx: Scale,
  sy: Scale,
): string {
  const upper = linePath(xs, high, sx, sy);
  const back: string[] = [];
  for (let i = xs.length - 1; i >= 0; i--) {
    back.push(`L${sx(xs[i]!).toFixed(2)},${sy(low[i]!).toFixed(2)}`);
  }
  return `${upper} ${back.join(" ")} Z`;
}
