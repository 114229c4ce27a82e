// Bar-chart series extraction: the current grid's first sum measure by the
// first row axis. Summing across the other grouped dimensions is the one
// piece of client-side arithmetic allowed; its total must equal the grid's.

import type { Grid } from "./api-types.js";

export interface BarChartData {
  measure: string;
  categories: string[];
  values: number[];
}

export function chartSeries(grid: Grid, categoryDimension: string, measureIndex = 0): BarChartData {
  const axisDims = grid.axes.map((a) => a.dimension);
  const position = axisDims.indexOf(categoryDimension);
  if (position < 0) {
    throw new Error(`dimension ${categoryDimension} is not grouped in this grid`);
  }
  const totals = new Map<string, number>();
  for (const row of grid.rows) {
    const label = row.labels[position]!;
    totals.set(label, (totals.get(label) ?? 0) + row.values[measureIndex]!);
  }
  const categories = [...totals.keys()].sort();
  return {
    measure: grid.columns[grid.axes.length + measureIndex]!,
    categories,
    values: categories.map((c) => totals.get(c)!),
  };
}

export function gridMeasureTotal(grid: Grid, measureIndex = 0): number {
  let total = 0;
  for (const row of grid.rows) total += row.values[measureIndex]!;
  return total;
}
