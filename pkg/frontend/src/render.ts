// DOM rendering for the explorer panels: pivot table, breadcrumbs, bar chart.
// Values land in the DOM exactly as the API returned them.

import type { QueryResponse } from "./api-types.js";
import { planBadgeClass, planBadgeText } from "./badge.js";
import type { BarChartData } from "./chart.js";
import type { PivotLayout } from "./pivot.js";

export interface TableCallbacks {
  onMemberClick(dimension: string, memberKey: string | number): void;
  canDrill(dimension: string): boolean;
}

export function renderTable(
  container: HTMLElement,
  layout: PivotLayout,
  callbacks: TableCallbacks,
): void {
  container.textContent = "";
  if (layout.rows.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-panel";
    empty.textContent = "no data for the current selection";
    container.appendChild(empty);
    return;
  }
  const table = document.createElement("table");
  table.className = "pivot";
  const head = table.createTHead();
  const headRow = head.insertRow();
  for (const name of layout.rowAxisNames) {
    const th = document.createElement("th");
    th.textContent = name;
    headRow.appendChild(th);
  }
  for (const group of layout.columnGroups) {
    for (const measure of layout.measureNames) {
      const th = document.createElement("th");
      th.className = "measure";
      th.textContent = group.length ? `${group.join(" / ")} ${measure}` : measure;
      headRow.appendChild(th);
    }
  }

  const body = table.createTBody();
  let previous: string[] | null = null;
  for (const row of layout.rows) {
    const tr = body.insertRow();
    row.labels.forEach((label, i) => {
      const td = tr.insertCell();
      td.className = "axis-cell";
      const repeated =
        previous !== null &&
        row.labels.slice(0, i + 1).every((l, j) => l === previous![j]);
      if (repeated) {
        td.textContent = "";
        return;
      }
      const dimension = layout.rowAxisDimensions[i]!;
      const key = row.keys[i];
      if (key != null && callbacks.canDrill(dimension)) {
        const link = document.createElement("a");
        link.href = "#";
        link.textContent = label;
        link.addEventListener("click", (event) => {
          event.preventDefault();
          callbacks.onMemberClick(dimension, key);
        });
        td.appendChild(link);
      } else {
        td.textContent = label;
      }
    });
    previous = row.labels;
    for (const cell of row.cells) {
      if (cell.values === null) {
        const td = tr.insertCell();
        td.className = "value empty";
        td.textContent = "";
        continue;
      }
      for (const value of cell.values) {
        const td = tr.insertCell();
        td.className = "value";
        td.textContent = String(value);
      }
    }
  }
  container.appendChild(table);
}

export function renderBadge(container: HTMLElement, result: QueryResponse): void {
  container.textContent = planBadgeText(result);
  container.className = planBadgeClass(result);
}

export function renderBreadcrumbs(
  container: HTMLElement,
  trails: Array<{
    dimension: string;
    crumbs: Array<{ label: string; level: string | null; current: boolean }>;
  }>,
  onCrumb: (dimension: string, level: string | null) => void,
): void {
  container.textContent = "";
  for (const trail of trails) {
    const line = document.createElement("div");
    line.className = "breadcrumb";
    const name = document.createElement("span");
    name.className = "dim-name";
    name.textContent = trail.dimension;
    line.appendChild(name);
    trail.crumbs.forEach((crumb, i) => {
      if (i > 0) line.appendChild(document.createTextNode(" › "));
      if (crumb.current) {
        const strong = document.createElement("strong");
        strong.textContent = crumb.label;
        line.appendChild(strong);
      } else {
        const link = document.createElement("a");
        link.href = "#";
        link.textContent = crumb.label;
        link.addEventListener("click", (event) => {
          event.preventDefault();
          onCrumb(trail.dimension, crumb.level);
        });
        line.appendChild(link);
      }
    });
    container.appendChild(line);
  }
}

export function renderBarChart(container: HTMLElement, data: BarChartData): void {
  container.textContent = "";
  const width = 640;
  const height = 240;
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "bar-chart");
  if (data.values.length === 0) {
    container.appendChild(svg);
    return;
  }
  const peak = Math.max(...data.values, 0);
  const trough = Math.min(...data.values, 0);
  const span = peak - trough || 1;
  const plotHeight = height - 40;
  const zeroY = 10 + (peak / span) * plotHeight;
  const barWidth = Math.min(60, (width - 20) / data.values.length - 4);

  data.values.forEach((value, i) => {
    const x = 10 + i * ((width - 20) / data.values.length);
    const barHeight = (Math.abs(value) / span) * plotHeight;
    const rect = document.createElementNS(svgNS, "rect");
    rect.setAttribute("x", x.toFixed(1));
    rect.setAttribute("y", (value >= 0 ? zeroY - barHeight : zeroY).toFixed(1));
    rect.setAttribute("width", barWidth.toFixed(1));
    rect.setAttribute("height", barHeight.toFixed(1));
    rect.setAttribute("class", value >= 0 ? "bar positive" : "bar negative");
    const title = document.createElementNS(svgNS, "title");
    title.textContent = `${data.categories[i]}: ${value}`;
    rect.appendChild(title);
    svg.appendChild(rect);
    const text = document.createElementNS(svgNS, "text");
    text.setAttribute("x", (x + barWidth / 2).toFixed(1));
    text.setAttribute("y", String(height - 6));
    text.setAttribute("class", "bar-label");
    text.textContent = data.categories[i]!;
    svg.appendChild(text);
  });
  const axis = document.createElementNS(svgNS, "line");
  axis.setAttribute("x1", "0");
  axis.setAttribute("x2", String(width));
  axis.setAttribute("y1", zeroY.toFixed(1));
  axis.setAttribute("y2", zeroY.toFixed(1));
  axis.setAttribute("class", "zero-axis");
  svg.appendChild(axis);
  container.appendChild(svg);
}

export function renderError(container: HTMLElement, message: string | null): void {
  container.textContent = message ?? "";
  container.className = message ? "error-panel visible" : "error-panel";
}
