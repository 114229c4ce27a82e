// Client-side pivot layout: lay a result grid out against the current
// row/column axis assignment. Values are copied from the response verbatim;
// no arithmetic happens here.

import type { Grid } from "./api-types.js";
import type { AxisAssignment } from "./state.js";

export interface PivotCell {
  values: ReadonlyArray<number> | null; // null = empty intersection
}

export interface PivotLayout {
  rowAxisNames: string[]; // "dimension.level" per row axis column
  rowAxisDimensions: string[];
  columnGroups: string[][]; // one label tuple per column group
  measureNames: string[];
  rows: Array<{
    labels: string[];
    keys: Array<string | number | null>; // member keys, for drill anchors
    cells: PivotCell[];
  }>;
}

function positionsOf(grid: Grid, dimensions: string[]): number[] {
  const axisDims = grid.axes.map((a) => a.dimension);
  return dimensions
    .filter((d) => axisDims.includes(d))
    .map((d) => axisDims.indexOf(d));
}

export function layoutGrid(grid: Grid, axes: AxisAssignment): PivotLayout {
  const rowPositions = positionsOf(grid, axes.rows);
  const colPositions = positionsOf(grid, axes.cols);
  const measureNames = grid.columns.slice(grid.axes.length);

  const columnKeys = new Map<string, string[]>();
  for (const row of grid.rows) {
    const labels = colPositions.map((p) => row.labels[p]!);
    columnKeys.set(JSON.stringify(labels), labels);
  }
  const columnGroups = [...columnKeys.entries()]
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([, labels]) => labels);

  const byRow = new Map<string, {
    labels: string[];
    keys: Array<string | number | null>;
    byCol: Map<string, ReadonlyArray<number>>;
  }>();
  const rowOrder: string[] = [];
  for (const row of grid.rows) {
    const rowLabels = rowPositions.map((p) => row.labels[p]!);
    const rowKey = JSON.stringify(rowLabels);
    const colKey = JSON.stringify(colPositions.map((p) => row.labels[p]!));
    let entry = byRow.get(rowKey);
    if (!entry) {
      entry = {
        labels: rowLabels,
        keys: rowPositions.map((p) => row.keys[p] ?? null),
        byCol: new Map(),
      };
      byRow.set(rowKey, entry);
      rowOrder.push(rowKey);
    }
    entry.byCol.set(colKey, row.values);
  }
  rowOrder.sort();

  const rows = rowOrder.map((key) => {
    const entry = byRow.get(key)!;
    const cells = columnGroups.map((labels) => {
      const values = entry.byCol.get(JSON.stringify(labels));
      return { values: values ?? null };
    });
    return { labels: entry.labels, keys: entry.keys, cells };
  });

  return {
    rowAxisNames: rowPositions.map((p) => grid.columns[p]!),
    rowAxisDimensions: rowPositions.map((p) => grid.axes[p]!.dimension),
    columnGroups,
    measureNames,
    rows,
  };
}

/** Every value in a layout, for invariance checks: pivoting must not change it. */
export function layoutValueMultiset(layout: PivotLayout): number[] {
  const out: number[] = [];
  for (const row of layout.rows) {
    for (const cell of row.cells) {
      if (cell.values !== null) out.push(...cell.values);
    }
  }
  return out.sort((a, b) => a - b);
}
