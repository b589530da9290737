// TrialView: a pure projection of API responses. No arithmetic on the
// numbers beyond formatting; reducers only reshape payloads for rendering.

import type {
  BandsResponse, ConfsetResponse, FitResponse, LockSnapshot, TrialState,
  WhatIfResponse,
} from "./api.js";

export interface PendingRow {
  center_id: string;
  arm: string;
  y: string;
  a: string[];
  z: string[];
  error?: { field: string; message: string };
}

export interface TrialView {
  trial: TrialState | null;
  fit: FitResponse | null;
  whatIf: WhatIfResponse | null;
  confset: ConfsetResponse | null;
  bands: BandsResponse | null;
  pendingRows: PendingRow[];
  banner: string | null;          // 409s and other non-field errors
  schemaVersion: number | null;
}

export function emptyView(): TrialView {
  return { trial: null, fit: null, whatIf: null, confset: null, bands: null,
           pendingRows: [], banner: null, schemaVersion: null };
}

export function withTrial(view: TrialView, trial: TrialState): TrialView {
  return { ...view, trial, schemaVersion: trial.schema_version, banner: null };
}

export function withFit(view: TrialView, fit: FitResponse): TrialView {
  return { ...view, fit, schemaVersion: fit.schema_version };
}

export function withWhatIf(view: TrialView, whatIf: WhatIfResponse): TrialView {
  return { ...view, whatIf, schemaVersion: whatIf.schema_version };
}

export function withGrids(view: TrialView, confset: ConfsetResponse | null,
                          bands: BandsResponse | null): TrialView {
  return { ...view, confset, bands };
}

export function withBanner(view: TrialView, banner: string | null): TrialView {
  return { ...view, banner };
}

export function withRowError(view: TrialView, field: string, message: string): TrialView {
  const m = field.match(/^rows\[(\d+)\]\.?(.*)$/);
  if (!m) return withBanner(view, `${field}: ${message}`);
  const idx = Number(m[1]);
  const pendingRows = view.pendingRows.map((row, i) =>
    i === idx ? { ...row, error: { field: m[2] || "row", message } } : row);
  return { ...view, pendingRows };
}

export function activeStage(view: TrialView): number {
  const locked = view.trial?.locked_stages ?? [];
  return (locked.length ? Math.max(...locked) : 0) + 1;
}

export function lockHistory(view: TrialView): LockSnapshot[] {
  const locks = view.trial?.locks ?? {};
  return Object.keys(locks).sort((a, b) => Number(a) - Number(b))
    .map((k) => locks[k]);
}

export function stageRows(view: TrialView, stage: number) {
  return (view.trial?.rows ?? []).filter((r) => r.stage === stage);
}

// display formatting: the single precision rule for every number on screen
export function fmt(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  if (Number.isInteger(value) && Math.abs(value) < 1e15) return String(value);
  return Number(value.toPrecision(6)).toString();
}
