// Recorded API payloads (shapes match the service's JSON responses).

import type {
  BandsResponse, ConfsetResponse, FitResponse, TrialState, WhatIfResponse,
} from "../src/api.js";

export const trial: TrialState = {
  schema_version: 1,
  trial_id: "t1",
  config: {
    bounds: { lower: [0, 0], upper: [2, 8] },
    link: "logit",
    cost: { kind: "linear", unit_costs: [8, 2] },
    theta: 0.8,
    z_ref: [0],
  },
  n_rows: 4,
  stages: [1],
  locked_stages: [],
  locks: {},
  rows: [
    { stage: 1, center_id: "c1", arm: "intervention", y: 0.61, a: [1, 4], z: [0.2] },
    { stage: 1, center_id: "c1", arm: "intervention", y: 0.58, a: [1, 4], z: [0.2] },
    { stage: 1, center_id: "c2", arm: "control", y: 0.35, a: [0, 0], z: [-0.4] },
    { stage: 1, center_id: "c2", arm: "control", y: 0.41, a: [0, 0], z: [-0.4] },
  ],
};

export const fit: FitResponse = {
  schema_version: 1,
  trial_id: "t1",
  n_rows: 4,
  fit: {
    schema_version: 1,
    link: "logit",
    coefficient_names: ["intercept", "a_1", "a_2", "z_1"],
    coefficients: [-0.512837, 0.211399, 0.0831207, -0.199332],
    standard_errors: [0.0412, 0.0233, 0.0114, 0.0351],
    coefficient_cis: [
      [-0.593584, -0.43209],
      [0.165733, 0.257065],
      [0.0607771, 0.105464],
      [-0.268132, -0.130532],
    ],
    n_total: 4,
    converged: true,
    beta: { intercept: -0.512837, effects: [0.211399, 0.0831207],
            covariate_effects: [-0.199332] },
  },
  tests: [
    { kind: "wald_chisq", statistic: 91.3321, df: 2, p_value: 1.3305e-20 },
    { kind: "two_sample_z", statistic: 7.2141, df: 1, p_value: 0.0000012 },
  ],
};

export const whatIf: WhatIfResponse = {
  schema_version: 1,
  trial_id: "t1",
  theta: 0.8,
  cost_kind: "linear",
  recommendation: {
    schema_version: 1,
    package: [1.0, 8.0],
    projected_mean: 0.800124,
    cost: 24.0,
    feasible: true,
    method: "linear_ranking",
    z: [0],
  },
};

export const whatIfInfeasible: WhatIfResponse = {
  ...whatIf,
  recommendation: {
    ...whatIf.recommendation,
    package: [2.0, 8.0],
    projected_mean: 0.71233,
    cost: 32.0,
    feasible: false,
    method: "fallback_upper_bounds",
  },
};

export const confset: ConfsetResponse = {
  schema_version: 1,
  grid_increment: 1.0,
  total_grid_points: 27,
  member_count: 3,
  set_percentage: 0.1111,
  members: [[1, 7], [1, 8], [2, 6]],
};

export const bands: BandsResponse = {
  schema_version: 1,
  grid_increment: 1.0,
  multiplier: 3.0802,
  entries: ([] as BandsResponse["entries"]).concat(
    ...[0, 1, 2].map((x1) =>
      Array.from({ length: 9 }, (_, x2) => ({
        x: [x1, x2],
        mean: 0.4 + 0.03 * x1 + 0.04 * x2,
        band_lower: 0.3 + 0.03 * x1 + 0.04 * x2,
        band_upper: 0.5 + 0.03 * x1 + 0.04 * x2,
        ci_lower: 0.35 + 0.03 * x1 + 0.04 * x2,
        ci_upper: 0.45 + 0.03 * x1 + 0.04 * x2,
      })))),
};
