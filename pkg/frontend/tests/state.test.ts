import { describe, expect, it } from "vitest";

import {
  activeStage, emptyView, fmt, lockHistory, stageRows, withBanner, withFit,
  withRowError, withTrial, withWhatIf,
} from "../src/state.js";
import { fit, trial, whatIf } from "./fixtures.js";

describe("view folding", () => {
  it("projects trial and fit payloads without touching the numbers", () => {
    let v = withTrial(emptyView(), trial);
    v = withFit(v, fit);
    expect(v.trial?.trial_id).toBe("t1");
    expect(v.fit?.fit.coefficients).toEqual(fit.fit.coefficients);
    expect(v.schemaVersion).toBe(1);
  });

  it("active stage is one past the highest locked stage", () => {
    let v = withTrial(emptyView(), trial);
    expect(activeStage(v)).toBe(1);
    v = withTrial(v, { ...trial, locked_stages: [1, 2] });
    expect(activeStage(v)).toBe(3);
  });

  it("lock history sorts numerically by stage", () => {
    const snap = (k: number) => ({
      stage: k, n_rows: 1, fit: fit.fit,
      next_stage_recommendation: whatIf.recommendation,
    });
    const v = withTrial(emptyView(), {
      ...trial,
      locks: { "10": snap(10), "2": snap(2), "1": snap(1) },
      locked_stages: [1, 2, 10],
    });
    expect(lockHistory(v).map((s) => s.stage)).toEqual([1, 2, 10]);
  });

  it("stage rows filters by stage", () => {
    const v = withTrial(emptyView(), trial);
    expect(stageRows(v, 1)).toHaveLength(4);
    expect(stageRows(v, 2)).toHaveLength(0);
  });

  it("field errors land on the offending pending row", () => {
    let v = { ...withTrial(emptyView(), trial), pendingRows: [
      { center_id: "c9", arm: "treatment", y: "1", a: ["1", "2"], z: ["0"] },
      { center_id: "c8", arm: "control", y: "1", a: ["0", "0"], z: ["0"] },
    ] };
    v = withRowError(v, "rows[0].arm", "arm must be one of ...");
    expect(v.pendingRows[0].error?.field).toBe("arm");
    expect(v.pendingRows[1].error).toBeUndefined();
    expect(v.banner).toBeNull();
  });

  it("non-row errors go to the banner", () => {
    let v = withTrial(emptyView(), trial);
    v = withRowError(v, "stage", "stage must be >= 1");
    expect(v.banner).toContain("stage");
    v = withBanner(v, "409: stages lock in order");
    expect(v.banner).toContain("409");
  });

  it("what-if replaces only the what-if slice", () => {
    let v = withTrial(emptyView(), trial);
    v = withWhatIf(v, whatIf);
    expect(v.whatIf?.recommendation.package).toEqual([1.0, 8.0]);
    expect(v.trial).toBe(trial);
  });
});

describe("display formatting", () => {
  it("keeps integers exact and rounds to 6 significant digits", () => {
    expect(fmt(9270)).toBe("9270");
    expect(fmt(0.800124)).toBe("0.800124");
    expect(fmt(0.16600000000000106)).toBe("0.166");
    expect(fmt(-0.20199999999999801)).toBe("-0.202");
    expect(fmt(1.3305e-20)).toBe("1.3305e-20");
  });
});
