// Typed client for the trial-steering JSON API. The UI never computes
// statistics: everything rendered comes verbatim from these payloads.

export interface TrialConfig {
  trial_id?: string;
  bounds: { lower: number[]; upper: number[] };
  link: string;
  cost: { kind: string; unit_costs?: number[]; cubic_coeffs?: number[][]; fixed_cost?: number };
  theta: number;
  z_ref?: number[];
  include_intercept?: boolean;
}

export interface OutcomeRow {
  center_id: string;
  arm: "intervention" | "control";
  y: number;
  a: number[];
  z: number[];
}

export interface FitPayload {
  schema_version: number;
  link: string;
  coefficient_names: string[];
  coefficients: number[];
  standard_errors: number[];
  coefficient_cis: [number, number][];
  n_total: number;
  converged: boolean;
  beta: { intercept: number; effects: number[]; covariate_effects: number[] };
}

export interface TestPayload {
  kind: string;
  statistic: number;
  df: number;
  p_value: number;
}

export interface FitResponse {
  schema_version: number;
  trial_id: string;
  n_rows: number;
  fit: FitPayload;
  tests: TestPayload[];
}

export interface RecommendationPayload {
  schema_version: number;
  package: number[];
  projected_mean: number;
  cost: number;
  feasible: boolean;
  method: string;
  z: number[];
}

export interface WhatIfResponse {
  schema_version: number;
  trial_id: string;
  recommendation: RecommendationPayload;
  theta: number;
  cost_kind: string;
}

export interface ConfsetResponse {
  schema_version: number;
  grid_increment: number;
  total_grid_points: number;
  member_count: number;
  set_percentage: number;
  members: number[][];
}

export interface BandEntry {
  x: number[];
  mean: number;
  band_lower: number;
  band_upper: number;
  ci_lower: number;
  ci_upper: number;
}

export interface BandsResponse {
  schema_version: number;
  grid_increment: number;
  multiplier: number;
  entries: BandEntry[];
}

export interface LockSnapshot {
  stage: number;
  n_rows: number;
  fit: FitPayload;
  next_stage_recommendation: RecommendationPayload;
}

export interface TrialState {
  schema_version: number;
  trial_id: string;
  config: TrialConfig;
  n_rows: number;
  stages: number[];
  locked_stages: number[];
  locks: Record<string, LockSnapshot>;
  rows: (OutcomeRow & { stage: number })[];
}

export class ApiError extends Error {
  status: number;
  field?: string;
  constructor(status: number, message: string, field?: string) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

export class ApiClient {
  base: string;
  private writeQueue: Promise<unknown> = Promise.resolve();

  constructor(base: string) {
    this.base = base.replace(/\/$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(`${this.base}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = (await res.json()) as Record<string, unknown>;
    if (!res.ok) {
      throw new ApiError(res.status, String(doc.error ?? res.statusText),
        doc.field === undefined ? undefined : String(doc.field));
    }
    return doc as T;
  }

  // mutations are serialized: one in-flight write per client
  private enqueue<T>(task: () => Promise<T>): Promise<T> {
    const next = this.writeQueue.then(task, task);
    this.writeQueue = next.catch(() => undefined);
    return next;
  }

  createTrial(config: TrialConfig): Promise<{ trial_id: string }> {
    return this.enqueue(() => this.request("POST", "/api/trials", config));
  }

  appendRows(trialId: string, stage: number, rows: OutcomeRow[]): Promise<{ appended: number }> {
    return this.enqueue(() =>
      this.request("POST", `/api/trials/${trialId}/stages/${stage}/rows`, { rows }));
  }

  lockStage(trialId: string, stage: number): Promise<{ snapshot: LockSnapshot }> {
    return this.enqueue(() =>
      this.request("POST", `/api/trials/${trialId}/stages/${stage}/lock`, {}));
  }

  getTrial(trialId: string): Promise<TrialState> {
    return this.request("GET", `/api/trials/${trialId}`);
  }

  getFit(trialId: string): Promise<FitResponse> {
    return this.request("GET", `/api/trials/${trialId}/fit`);
  }

  whatIf(trialId: string, params: { theta?: number; cost?: string; z?: string }): Promise<WhatIfResponse> {
    const q = new URLSearchParams();
    if (params.theta !== undefined) q.set("theta", String(params.theta));
    if (params.cost) q.set("cost", params.cost);
    if (params.z) q.set("z", params.z);
    const qs = q.toString();
    return this.request("GET", `/api/trials/${trialId}/recommend${qs ? "?" + qs : ""}`);
  }

  confset(trialId: string, increment: number): Promise<ConfsetResponse> {
    return this.request("GET", `/api/trials/${trialId}/confset?increment=${increment}`);
  }

  bands(trialId: string, increment: number): Promise<BandsResponse> {
    return this.request("GET", `/api/trials/${trialId}/bands?increment=${increment}`);
  }
}
