// Plan-provenance badge: always rendered from the displayed result's plan
// field, so the badge can never disagree with the grid next to it.

import type { QueryResponse } from "./api-types.js";

export function planBadgeText(result: QueryResponse): string {
  const plan = result.plan;
  return `${plan.kind}(${plan.detail}) · ${plan.input_rows} input rows · ` +
    `${plan.elapsed_ms.toFixed(2)} ms · epoch ${result.epoch}`;
}

export function planBadgeClass(result: QueryResponse): string {
  return `plan-badge plan-${result.plan.kind}`;
}
