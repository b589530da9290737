// Page controller: wires the API client, view state, and renderer.
// Mutations go through the client's single-writer queue; lock actions need
// an explicit confirmation because locked stages are immutable.

import { ApiClient, ApiError, OutcomeRow } from "./api.js";
import { render } from "./render.js";
import {
  PendingRow, TrialView, activeStage, emptyView, fmt, withBanner, withFit,
  withGrids, withRowError, withTrial, withWhatIf,
} from "./state.js";

export class SteeringApp {
  client: ApiClient;
  root: HTMLElement;
  trialId: string;
  view: TrialView = emptyView();
  confirmFn: (msg: string) => boolean;

  constructor(root: HTMLElement, client: ApiClient, trialId: string,
              confirmFn?: (msg: string) => boolean) {
    this.root = root;
    this.client = client;
    this.trialId = trialId;
    this.confirmFn = confirmFn ?? ((msg) => window.confirm(msg));
  }

  draw(): void {
    render(this.root, this.view);
    this.bind();
  }

  async refreshTrial(): Promise<void> {
    this.view = withTrial(this.view, await this.client.getTrial(this.trialId));
    try {
      this.view = withFit(this.view, await this.client.getFit(this.trialId));
    } catch (err) {
      if (!(err instanceof ApiError)) throw err; // no rows yet: keep panel empty
    }
    this.draw();
  }

  addPendingRow(): void {
    const P = this.view.trial?.config.bounds.lower.length ?? 0;
    const Q = (this.view.trial?.config.z_ref ?? []).length;
    const row: PendingRow = { center_id: "", arm: "intervention", y: "",
      a: Array(P).fill(""), z: Array(Q).fill("") };
    this.view = { ...this.view, pendingRows: [...this.view.pendingRows, row] };
    this.draw();
  }

  setPendingRows(rows: PendingRow[]): void {
    this.view = { ...this.view, pendingRows: rows };
    this.draw();
  }

  private collectRows(): OutcomeRow[] {
    return this.view.pendingRows.map((r) => ({
      center_id: r.center_id.trim(),
      arm: r.arm.trim() as OutcomeRow["arm"],
      y: Number(r.y),
      a: r.a.map(Number),
      z: r.z.map(Number),
    }));
  }

  async submitRows(): Promise<void> {
    const stage = activeStage(this.view);
    try {
      await this.client.appendRows(this.trialId, stage, this.collectRows());
      this.view = { ...this.view, pendingRows: [], banner: null };
      await this.refreshTrial();
    } catch (err) {
      if (err instanceof ApiError) {
        this.view = err.field !== undefined && err.status === 400
          ? withRowError(this.view, err.field, err.message)
          : withBanner(this.view, `${err.status}: ${err.message}`);
        this.draw();
        return;
      }
      throw err;
    }
  }

  async lockStage(stage: number): Promise<void> {
    if (!this.confirmFn(`Lock stage ${stage}? Its rows become immutable.`)) return;
    try {
      await this.client.lockStage(this.trialId, stage);
      await this.refreshTrial();
    } catch (err) {
      if (err instanceof ApiError) {
        this.view = withBanner(this.view, `${err.status}: ${err.message}`);
        this.draw();
        return;
      }
      throw err;
    }
  }

  async runWhatIf(params: { theta?: number; cost?: string; z?: string }): Promise<void> {
    try {
      this.view = withWhatIf(this.view, await this.client.whatIf(this.trialId, params));
    } catch (err) {
      if (err instanceof ApiError) {
        this.view = withBanner(this.view, `${err.status}: ${err.message}`);
      } else {
        throw err;
      }
    }
    this.draw();
  }

  async loadGrids(increment = 0.1): Promise<void> {
    const [cs, cb] = await Promise.all([
      this.client.confset(this.trialId, increment),
      this.client.bands(this.trialId, increment),
    ]);
    this.view = withGrids(this.view, cs, cb);
    this.draw();
  }

  private bind(): void {
    this.root.querySelector("#add-row")?.addEventListener("click", () => this.addPendingRow());
    this.root.querySelector("#submit-rows")?.addEventListener("click", () => {
      this.syncPendingFromDom();
      void this.submitRows();
    });
    this.root.querySelectorAll("button.lock").forEach((btn) => {
      btn.addEventListener("click", () => {
        const stage = Number((btn as HTMLElement).dataset.stage);
        void this.lockStage(stage);
      });
    });
    this.root.querySelector("#run-whatif")?.addEventListener("click", () => {
      const theta = Number((this.root.querySelector("#theta") as HTMLInputElement)?.value);
      const kind = (this.root.querySelector("#cost-kind") as HTMLSelectElement)?.value;
      const spec = (this.root.querySelector("#cost-spec") as HTMLInputElement)?.value;
      const z = (this.root.querySelector("#z-input") as HTMLInputElement)?.value;
      void this.runWhatIf({
        theta: Number.isFinite(theta) ? theta : undefined,
        cost: kind && spec ? spec : undefined,
        z: z || undefined,
      });
    });
    const slider = this.root.querySelector("#theta") as HTMLInputElement | null;
    slider?.addEventListener("input", () => {
      const label = this.root.querySelector("#theta-value");
      if (label) label.textContent = fmt(Number(slider.value));
    });
    this.root.querySelector("#load-grids")?.addEventListener("click", () => void this.loadGrids());
  }

  syncPendingFromDom(): void {
    const cells = this.root.querySelectorAll<HTMLElement>("td.cell");
    const rows = this.view.pendingRows.map((r) => ({ ...r, a: [...r.a], z: [...r.z] }));
    cells.forEach((cell) => {
      const i = Number(cell.dataset.row);
      const col = cell.dataset.col ?? "";
      const text = cell.textContent ?? "";
      const row = rows[i];
      if (!row) return;
      if (col === "center_id") row.center_id = text;
      else if (col === "arm") row.arm = text;
      else if (col === "y") row.y = text;
      else if (col.startsWith("a_")) row.a[Number(col.slice(2)) - 1] = text;
      else if (col.startsWith("z_")) row.z[Number(col.slice(2)) - 1] = text;
    });
    this.view = { ...this.view, pendingRows: rows };
  }
}

export async function boot(root: HTMLElement, base: string, trialId: string): Promise<SteeringApp> {
  const app = new SteeringApp(root, new ApiClient(base), trialId);
  await app.refreshTrial();
  return app;
}
