// Explorer wiring: one session against the warehouse API. Drill, slice and
// roll-up rebuild the request and re-query; moving axes only re-lays-out the
// last result. At most one query is in flight; superseded requests abort.

import type { Catalog } from "./api-types.js";
import { chartSeries, gridMeasureTotal } from "./chart.js";
import { ApiError, HttpApiClient, type ApiClient } from "./client.js";
import { layoutGrid } from "./pivot.js";
import {
  renderBadge,
  renderBarChart,
  renderBreadcrumbs,
  renderError,
  renderTable,
} from "./render.js";
import {
  assignAxes,
  back,
  breadcrumbs,
  canDrill,
  dimensionInfo,
  drill,
  forward,
  initialState,
  levelOf,
  reconcileAxes,
  rollUpTo,
  slice,
  withResult,
  type DimensionInfo,
  type ExplorerState,
} from "./state.js";

// Same origin by default; `?api=http://127.0.0.1:8741` points the explorer at
// a warehouse served elsewhere (the API allows cross-origin reads).
const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
const client: ApiClient = new HttpApiClient(apiBase);

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class Explorer {
  private state: ExplorerState;
  private dims: Map<string, DimensionInfo> = new Map();
  private catalog: Catalog | null = null;
  private inflight: AbortController | null = null;

  constructor(private readonly api: ApiClient) {
    this.state = initialState({});
  }

  async start(): Promise<void> {
    this.catalog = await this.api.catalog();
    this.dims = dimensionInfo(this.catalog);
    const office = this.catalog.dimensions.find((d) => d.name === "office");
    const first = office ?? this.catalog.dimensions[0]!;
    const coarsest = [...first.levels].sort((a, b) => b.ordinal - a.ordinal)[0]!;
    this.state = initialState({ [first.name]: coarsest.name });
    this.renderControls();
    await this.requery();
  }

  private apply(next: ExplorerState | null, requery: boolean): void {
    if (next === null) return;
    this.state = reconcileAxes(next);
    if (requery) {
      void this.requery();
    } else {
      this.renderResult();
    }
    this.renderControls();
  }

  private async requery(): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    renderError(element("error"), null);
    try {
      const result = await this.api.query(this.state.request, controller.signal);
      if (this.inflight !== controller) return; // superseded
      this.state = withResult(this.state, result);
      this.renderResult();
      this.renderControls();
    } catch (err) {
      if (controller.signal.aborted) return;
      if (err instanceof ApiError) {
        const field = err.body.field ? ` (${err.body.field})` : "";
        renderError(element("error"), `${err.body.error}${field}`);
      } else {
        renderError(element("error"), String(err));
      }
    }
  }

  private renderResult(): void {
    const result = this.state.result;
    if (!result) return;
    const layout = layoutGrid(result.grid, this.state.axes);
    renderTable(element("grid"), layout, {
      canDrill: (dimension) => canDrill(this.dims, this.state, dimension),
      onMemberClick: (dimension, key) =>
        this.apply(drill(this.dims, this.state, dimension, key), true),
    });
    renderBadge(element("badge"), result);

    const firstRowDim = this.state.axes.rows[0];
    const chartPanel = element("chart");
    if (firstRowDim && result.grid.rows.length) {
      const data = chartSeries(result.grid, firstRowDim);
      renderBarChart(chartPanel, data);
      const total = gridMeasureTotal(result.grid);
      element("chart-total").textContent =
        `${data.measure} total: ${total} (${data.categories.length} categories)`;
    } else {
      chartPanel.textContent = "";
      element("chart-total").textContent = "";
    }
  }

  private renderControls(): void {
    const grouped = Object.keys(this.state.request.query.group_by ?? {});
    renderBreadcrumbs(
      element("breadcrumbs"),
      [...this.dims.keys()].map((dimension) => ({
        dimension,
        crumbs: breadcrumbs(this.dims, this.state, dimension),
      })),
      (dimension, level) => {
        if (level === null || levelOf(this.state, dimension) !== level) {
          const target = rollUpTo(this.dims, this.state, dimension, level);
          if (target) {
            this.apply(target, true);
            return;
          }
          // "drill" via breadcrumb when the dimension is at ALL
          this.apply(drill(this.dims, this.state, dimension), true);
        }
      },
    );

    const axisPanel = element("axes");
    axisPanel.textContent = "";
    for (const dimension of grouped) {
      const button = document.createElement("button");
      const onRows = this.state.axes.rows.includes(dimension);
      button.textContent = `${dimension}: ${onRows ? "rows" : "columns"}`;
      button.addEventListener("click", () => {
        const rows = this.state.axes.rows.filter((d) => d !== dimension);
        const cols = this.state.axes.cols.filter((d) => d !== dimension);
        (onRows ? cols : rows).push(dimension);
        this.apply(assignAxes(this.state, { rows, cols }), false);
      });
      axisPanel.appendChild(button);
    }

    void this.renderPicker();
  }

  private async renderPicker(): Promise<void> {
    const picker = element("picker");
    const dimSelect = element<HTMLSelectElement>("picker-dim");
    if (!dimSelect.options.length && this.catalog) {
      for (const d of this.catalog.dimensions) {
        for (const lv of d.levels) {
          const option = document.createElement("option");
          option.value = `${d.name}.${lv.name}`;
          option.textContent = `${d.name} › ${lv.name}`;
          dimSelect.appendChild(option);
        }
      }
    }
    const chosen = dimSelect.value;
    if (!chosen) return;
    const [dimension, level] = chosen.split(".") as [string, string];
    try {
      const page = await this.api.members(dimension, level, { pageSize: 200 });
      const list = element<HTMLSelectElement>("picker-members");
      list.textContent = "";
      for (const member of page.members) {
        const option = document.createElement("option");
        option.value = String(member.key);
        option.textContent = member.label;
        list.appendChild(option);
      }
      picker.classList.remove("stale");
    } catch {
      picker.classList.add("stale");
    }
  }

  bindStaticControls(): void {
    element("back").addEventListener("click", () => this.apply(back(this.state), true));
    element("forward").addEventListener("click", () =>
      this.apply(forward(this.state), true));
    element<HTMLSelectElement>("picker-dim").addEventListener("change", () =>
      void this.renderPicker());
    element("picker-apply").addEventListener("click", () => {
      const chosen = element<HTMLSelectElement>("picker-dim").value;
      if (!chosen) return;
      const [dimension, level] = chosen.split(".") as [string, string];
      const list = element<HTMLSelectElement>("picker-members");
      const members = Array.from(list.selectedOptions).map((o) => o.value);
      if (members.length) {
        this.apply(slice(this.state, dimension, level, members), true);
      }
    });
  }
}

const explorer = new Explorer(client);
explorer.bindStaticControls();
void explorer.start();
