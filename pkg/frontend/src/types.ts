// Wire types of the campaign service API. The console never computes model
// quantities itself; every number it renders arrives through these shapes.

export interface CampaignConfig {
  p: number;
  n_ini: number;
  n_seq: number;
  c: number | null;
  bifidelity: boolean;
  method: string;
  restarts: number;
  seed: number;
  fit_restarts?: number;
  nm_max_iters?: number;
}

export interface ObservationDoc {
  x: number[];
  value: number;
  censored: boolean;
  fidelity: "computer" | "physical";
}

export interface ProposalDiagnostics {
  value: number;
  lambda: number | null;
  trace_term: number | null;
  constant_included: boolean;
  high_censoring_risk: boolean;
}

export interface Proposal {
  x_next: number[];
  diagnostics: ProposalDiagnostics;
}

export interface CampaignDoc {
  id: string;
  config: CampaignConfig;
  status: "AwaitingObservation" | "ReadyToPropose" | "Failed";
  initial_design: number[][];
  observations: ObservationDoc[];
  proposals: Proposal[];
  pending_proposal: Proposal | null;
  model_snapshot: unknown;
  last_error: { stage: string; message: string } | null;
}

export interface PredictionPoint {
  mean: number;
  var: number;
  lambda_point: number;
}

export interface CriterionPoint {
  value: number;
  lambda: number | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}

export interface SubmitObservationRequest {
  x: number[];
  value: number | null;
  censored: boolean;
  seq_token?: string;
}
