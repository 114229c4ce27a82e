// Integration against a real warehouse API. Skipped unless STARCUBE_API is
// set, e.g.:  STARCUBE_API=http://127.0.0.1:8741 npx vitest run tests/live.test.ts

import { describe, expect, it } from "vitest";

import { HttpApiClient } from "../src/client.js";
import { dimensionInfo, drill, initialState } from "../src/state.js";

const base = process.env.STARCUBE_API;

describe.skipIf(!base)("live warehouse API", () => {
  const client = new HttpApiClient(base!);

  it("serves a catalog the explorer can drive", async () => {
    const catalog = await client.catalog();
    expect(catalog.dimensions.length).toBeGreaterThan(0);
    const dims = dimensionInfo(catalog);
    expect(dims.size).toBe(catalog.dimensions.length);
  });

  it("anchored drill sums to the parent row against the live engine", async () => {
    const catalog = await client.catalog();
    const dims = dimensionInfo(catalog);
    const time = dims.get("time");
    if (!time) return; // schema without a time dimension

    let state = initialState({ time: "year" });
    const parent = await client.query(state.request);
    const firstYearRow = parent.grid.rows[0];
    if (!firstYearRow) return; // empty warehouse
    const year = String(firstYearRow.keys[0]);

    state = drill(dims, state, "time", year)!;
    const child = await client.query(state.request);
    const childTotal = child.grid.rows.reduce((a, r) => a + r.values[0]!, 0);
    expect(childTotal).toBe(firstYearRow.values[0]);
    expect(child.plan.kind).toMatch(/^(mview|cuboid|scan)$/);
  });
});
