// DOM rendering: deterministic HTML from a TrialView. Rendering the same
// view twice produces identical markup (snapshot-friendly), and every number
// shown passes through fmt() on a verbatim API field.

import type { BandEntry, LockSnapshot } from "./api.js";
import { TrialView, activeStage, fmt, lockHistory, stageRows } from "./state.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function render(root: HTMLElement, view: TrialView): void {
  root.innerHTML = [
    renderBanner(view),
    renderHeader(view),
    renderStages(view),
    renderEntry(view),
    renderFitPanel(view),
    renderWhatIf(view),
    renderGrids(view),
    renderLockHistory(view),
  ].join("\n");
}

function renderBanner(view: TrialView): string {
  if (!view.banner) return `<div id="banner" class="banner hidden"></div>`;
  return `<div id="banner" class="banner error" role="alert">${esc(view.banner)}</div>`;
}

function renderHeader(view: TrialView): string {
  if (!view.trial) return `<section id="header"><h1>No trial loaded</h1></section>`;
  const cfg = view.trial.config;
  const sv = view.schemaVersion === null ? "" :
    ` <span class="schema">schema v${view.schemaVersion}</span>`;
  return `<section id="header">
<h1>Trial ${esc(view.trial.trial_id)}${sv}</h1>
<div class="meta">link=${esc(cfg.link)} theta=${fmt(cfg.theta)}
 bounds=${cfg.bounds.lower.map(fmt).join(",")}..${cfg.bounds.upper.map(fmt).join(",")}
 cost=${esc(cfg.cost.kind)} rows=${view.trial.n_rows}</div>
</section>`;
}

function renderStages(view: TrialView): string {
  if (!view.trial) return `<section id="stages"></section>`;
  const locked = new Set(view.trial.locked_stages);
  const active = activeStage(view);
  const all = Array.from(new Set([...view.trial.stages, active])).sort((a, b) => a - b);
  const parts = all.map((k) => {
    const rows = stageRows(view, k);
    const status = locked.has(k) ? "locked" : k === active ? "active" : "future";
    const table = rows.length === 0 ? "<p>no rows</p>" : `<table class="rows">
<thead><tr><th>center</th><th>arm</th><th>y</th><th>a</th><th>z</th></tr></thead>
<tbody>${rows.map((r) => `<tr><td>${esc(r.center_id)}</td><td>${esc(r.arm)}</td>` +
      `<td>${fmt(r.y)}</td><td>${r.a.map(fmt).join(", ")}</td>` +
      `<td>${r.z.map(fmt).join(", ")}</td></tr>`).join("")}</tbody></table>`;
    const lockBtn = status === "active" && rows.length > 0
      ? `<button class="lock" data-stage="${k}">Lock stage ${k}</button>` : "";
    return `<article class="stage ${status}" data-stage="${k}">
<h2>Stage ${k} <span class="status">${status}</span></h2>${table}${lockBtn}</article>`;
  });
  return `<section id="stages">${parts.join("\n")}</section>`;
}

function renderEntry(view: TrialView): string {
  if (!view.trial) return `<section id="entry"></section>`;
  const stage = activeStage(view);
  const P = view.trial.config.bounds.lower.length;
  const Q = (view.trial.config.z_ref ?? []).length;
  const header = ["center_id", "arm", "y",
    ...Array.from({ length: P }, (_, i) => `a_${i + 1}`),
    ...Array.from({ length: Q }, (_, i) => `z_${i + 1}`)];
  const body = view.pendingRows.map((row, i) => {
    const cells = [row.center_id, row.arm, row.y, ...row.a, ...row.z];
    const err = row.error;
    const tds = cells.map((v, c) => {
      const name = header[c];
      const bad = err && (err.field === name || (err.field === "row" && c === 0)
        || err.field.startsWith(name));
      return `<td class="cell${bad ? " cell-error" : ""}" data-row="${i}"` +
        ` data-col="${esc(name)}" contenteditable="true">${esc(String(v))}</td>`;
    }).join("");
    const msg = err ? `<td class="row-error">${esc(err.message)}</td>` : "<td></td>";
    return `<tr>${tds}${msg}</tr>`;
  }).join("");
  return `<section id="entry">
<h2>Enter stage ${stage} rows</h2>
<table class="entry-grid"><thead><tr>${header.map((h) =>
    `<th>${esc(h)}</th>`).join("")}<th></th></tr></thead><tbody>${body}</tbody></table>
<button id="add-row">Add row</button>
<button id="submit-rows" data-stage="${stage}">Submit rows</button>
</section>`;
}

function renderFitPanel(view: TrialView): string {
  if (!view.fit) return `<section id="fit"><h2>Fit</h2><p>no fit yet</p></section>`;
  const f = view.fit.fit;
  const rows = f.coefficient_names.map((name, i) =>
    `<tr><td>${esc(name)}</td><td class="coef" data-coef="${esc(name)}">${fmt(f.coefficients[i])}</td>` +
    `<td>${fmt(f.standard_errors[i])}</td>` +
    `<td class="ci" data-coef="${esc(name)}">(${fmt(f.coefficient_cis[i][0])}, ${fmt(f.coefficient_cis[i][1])})</td></tr>`).join("");
  const tests = view.fit.tests.map((t) =>
    `<tr><td>${esc(t.kind)}</td><td>${fmt(t.statistic)}</td><td>${t.df}</td>` +
    `<td class="pval" data-test="${esc(t.kind)}">${fmt(t.p_value)}</td></tr>`).join("");
  return `<section id="fit">
<h2>Fit (${view.fit.n_rows} rows)</h2>
<table class="coefs"><thead><tr><th>coefficient</th><th>estimate</th><th>se</th><th>95% CI</th></tr></thead>
<tbody>${rows}</tbody></table>
<h3>Tests</h3>
<table class="tests"><thead><tr><th>test</th><th>statistic</th><th>df</th><th>p</th></tr></thead>
<tbody>${tests}</tbody></table>
</section>`;
}

function renderWhatIf(view: TrialView): string {
  const theta = view.whatIf?.theta ?? view.trial?.config.theta ?? 0.8;
  const controls = `<div class="controls">
<label>theta <input id="theta" type="range" min="0.5" max="0.95" step="0.01" value="${theta}"></label>
<span id="theta-value">${fmt(theta)}</span>
<label>cost <select id="cost-kind">
<option value="">trial default</option>
<option value="linear">linear</option>
<option value="cubic">cubic</option>
</select></label>
<input id="cost-spec" placeholder="e.g. linear:800,170">
<input id="z-input" placeholder="z (comma separated)">
<button id="run-whatif">What if?</button>
</div>`;
  if (!view.whatIf) {
    return `<section id="whatif"><h2>What-if</h2>${controls}<p>no query yet</p></section>`;
  }
  const rec = view.whatIf.recommendation;
  const warning = rec.feasible ? "" :
    `<div class="banner warning" role="alert">target unattainable inside the bounds;
 showing the all-upper-bounds fallback</div>`;
  return `<section id="whatif"><h2>What-if</h2>${controls}${warning}
<div class="card" id="rec-card">
<div>package: <span id="rec-package">${rec.package.map(fmt).join(", ")}</span></div>
<div>projected mean: <span id="rec-mean">${fmt(rec.projected_mean)}</span></div>
<div>cost: <span id="rec-cost">${fmt(rec.cost)}</span></div>
<div>method: <span id="rec-method">${esc(rec.method)}</span></div>
<div>feasible: <span id="rec-feasible">${rec.feasible}</span></div>
</div></section>`;
}

function renderGrids(view: TrialView): string {
  const cs = view.confset;
  if (!cs || !view.trial) {
    return `<section id="grids"><h2>Confidence set</h2><p>not loaded</p>
<button id="load-grids">Load set & bands</button></section>`;
  }
  const P = view.trial.config.bounds.lower.length;
  const summary = `<p>${cs.member_count} of ${cs.total_grid_points} grid packages
 (${fmt(cs.set_percentage)} of the box)</p>`;
  let body: string;
  if (P === 2) {
    body = renderHeatmap(view, cs.members);
  } else {
    // sortable membership table for higher-dimensional packages
    const rows = cs.members.map((m) =>
      `<tr>${m.map((v) => `<td>${fmt(v)}</td>`).join("")}</tr>`).join("");
    body = `<table class="member-table sortable"><thead><tr>${Array.from({ length: P },
      (_, i) => `<th data-col="${i}">x${i + 1}</th>`).join("")}</tr></thead>
<tbody>${rows}</tbody></table>`;
  }
  return `<section id="grids"><h2>Confidence set</h2>${summary}${body}
<button id="load-grids">Reload set & bands</button></section>`;
}

function renderHeatmap(view: TrialView, members: number[][]): string {
  const bands = view.bands;
  const byKey = new Map<string, BandEntry>();
  const key = (x: number[]) => x.map((v) => v.toFixed(6)).join("|");
  for (const e of bands?.entries ?? []) byKey.set(key(e.x), e);
  const memberSet = new Set(members.map(key));
  const xs = Array.from(new Set((bands?.entries ?? members.map((m) => ({ x: m })))
    .map((e) => e.x[0]))).sort((a, b) => a - b);
  const ys = Array.from(new Set((bands?.entries ?? members.map((m) => ({ x: m })))
    .map((e) => e.x[1]))).sort((a, b) => a - b);
  if (xs.length === 0) return "<p>empty grid</p>";
  const header = `<tr><th></th>${xs.map((x) => `<th>${fmt(x)}</th>`).join("")}</tr>`;
  const rows = ys.slice().reverse().map((y) => {
    const cells = xs.map((x) => {
      const k = key([x, y]);
      const inSet = memberSet.has(k);
      const e = byKey.get(k);
      const title = e ? ` title="mean ${fmt(e.mean)} band (${fmt(e.band_lower)}, ${fmt(e.band_upper)})"` : "";
      return `<td class="hm${inSet ? " member" : ""}" data-x1="${fmt(x)}" data-x2="${fmt(y)}"${title}></td>`;
    }).join("");
    return `<tr><th>${fmt(y)}</th>${cells}</tr>`;
  }).join("");
  return `<table class="heatmap"><tbody>${header}${rows}</tbody></table>`;
}

function renderLockHistory(view: TrialView): string {
  const locks = lockHistory(view);
  if (locks.length === 0) {
    return `<section id="locks"><h2>Lock history</h2><p>none</p></section>`;
  }
  const items = locks.map((s: LockSnapshot) => {
    const rec = s.next_stage_recommendation;
    return `<li class="lock-item" data-stage="${s.stage}">stage ${s.stage}
 (${s.n_rows} rows) &rarr; next package
 <span class="lock-package">${rec.package.map(fmt).join(", ")}</span>
 at cost <span class="lock-cost">${fmt(rec.cost)}</span>
 (projected mean <span class="lock-mean">${fmt(rec.projected_mean)}</span>)</li>`;
  }).join("");
  return `<section id="locks"><h2>Lock history</h2><ol>${items}</ol></section>`;
}
