import { describe, expect, it } from "vitest";

import { layoutGrid, layoutValueMultiset } from "../src/pivot.js";
import { chartSeries, gridMeasureTotal } from "../src/chart.js";
import { FakeApiClient } from "./fake-client.js";

async function governoratePrestationGrid() {
  const client = new FakeApiClient();
  const response = await client.query({
    query: { group_by: { office: "governorate", prestation: "prestation" } },
  });
  return response.grid;
}

describe("pivot layout", () => {
  it("lays rows out flat when every dimension is on rows", async () => {
    const grid = await governoratePrestationGrid();
    const layout = layoutGrid(grid, { rows: ["office", "prestation"], cols: [] });
    expect(layout.rows).toHaveLength(grid.rows.length);
    expect(layout.columnGroups).toEqual([[]]);
    const flat = layout.rows.flatMap((r) => r.cells[0]!.values!);
    expect(flat.sort()).toEqual(grid.rows.map((r) => r.values[0]!).sort());
  });

  it("moving a dimension to columns transposes without changing any value", async () => {
    const grid = await governoratePrestationGrid();
    const byRows = layoutGrid(grid, { rows: ["office", "prestation"], cols: [] });
    const crosstab = layoutGrid(grid, { rows: ["office"], cols: ["prestation"] });
    expect(layoutValueMultiset(crosstab)).toEqual(layoutValueMultiset(byRows));
    // value at (gov, code) must appear at crosstab[gov][code]
    for (const row of grid.rows) {
      const [gov, code] = row.labels;
      const crossRow = crosstab.rows.find((r) => r.labels[0] === gov)!;
      const column = crosstab.columnGroups.findIndex((g) => g[0] === code);
      expect(crossRow.cells[column]!.values).toEqual(row.values);
    }
  });

  it("pivot then pivot back restores the original layout", async () => {
    const grid = await governoratePrestationGrid();
    const original = layoutGrid(grid, { rows: ["office", "prestation"], cols: [] });
    const there = layoutGrid(grid, { rows: ["prestation"], cols: ["office"] });
    const andBack = layoutGrid(grid, { rows: ["office", "prestation"], cols: [] });
    expect(andBack).toEqual(original);
    expect(layoutValueMultiset(there)).toEqual(layoutValueMultiset(original));
  });

  it("missing intersections render as empty cells, never zeros", async () => {
    const grid = await governoratePrestationGrid();
    const crosstab = layoutGrid(grid, { rows: ["office"], cols: ["prestation"] });
    const cells = crosstab.rows.flatMap((r) => r.cells);
    const present = cells.filter((c) => c.values !== null);
    expect(present).toHaveLength(grid.rows.length);
    expect(cells.length).toBeGreaterThan(present.length); // sparse combinations exist
  });

  it("carries member keys for drill anchors", async () => {
    const grid = await governoratePrestationGrid();
    const layout = layoutGrid(grid, { rows: ["office", "prestation"], cols: [] });
    expect(layout.rowAxisDimensions).toEqual(["office", "prestation"]);
    expect(layout.rows[0]!.keys[0]).toBe(grid.rows[0]!.keys[0]);
  });
});

describe("chart series", () => {
  it("one category per member, totals equal the grid total", async () => {
    const grid = await governoratePrestationGrid();
    const data = chartSeries(grid, "office");
    expect(data.categories).toEqual(["ARIANA", "BEJA"]);
    expect(data.values.reduce((a, b) => a + b, 0)).toBe(gridMeasureTotal(grid));
  });

  it("empty grid yields empty series", async () => {
    const client = new FakeApiClient();
    const response = await client.query({
      query: {
        group_by: { office: "governorate" },
        time_range: { from: "1990-01-01", to: "1990-12-31" },
      },
    });
    const data = chartSeries(response.grid, "office");
    expect(data.categories).toEqual([]);
    expect(data.values).toEqual([]);
  });

  it("rejects a dimension the grid does not group", async () => {
    const grid = await governoratePrestationGrid();
    expect(() => chartSeries(grid, "payment")).toThrow(/not grouped/);
  });
});
