// GENERATED from ../docs/api-schema.json - do not edit by hand.
// Regenerate with: npm run gen-types

export interface Measure {
  aggregator: "sum" | "count" | "average";
  measure: string;
}

export interface FilterClause {
  dimension: string;
  level: string;
  members: Array<string | number>;
}

export interface TimeRange {
  from: string;
  to: string;
}

export interface Sort {
  column: string;
  direction?: "asc" | "desc";
}

export interface QueryDocument {
  measures?: Measure[];
  group_by?: Record<string, string>;
  filters?: FilterClause[];
  time_range?: TimeRange;
  sort?: Sort;
  limit?: number;
}

export interface QueryRequest {
  query: QueryDocument;
  echo?: string;
  force_plan?: "mview" | "cuboid" | "scan";
}

export interface PlanInfo {
  kind: "mview" | "cuboid" | "scan";
  detail: string;
  input_rows: number;
  elapsed_ms: number;
}

export interface Axis {
  dimension: string;
  level: string;
}

export interface GridRow {
  keys: Array<string | number | null>;
  labels: string[];
  values: number[];
}

export interface Grid {
  axes: Axis[];
  columns: string[];
  rows: GridRow[];
}

export interface QueryResponse {
  epoch: number;
  plan: PlanInfo;
  grid: Grid;
  echo?: string;
}

export interface CatalogLevel {
  name: string;
  ordinal: number;
}

export interface CatalogDimension {
  name: string;
  levels: CatalogLevel[];
  members: number;
}

export interface CatalogMView {
  name: string;
  group_by: Record<string, string>;
  measures?: string[][];
  rewrite_enabled: boolean;
  refresh_mode?: string;
  built_epoch: number | null;
  stale: boolean;
  cells: number;
}

export interface CatalogCuboid {
  spec: string;
  cells: number;
  epoch: number;
}

export interface Catalog {
  fact: {
  name: string;
  measures: Array<{
  name: string;
  aggregator: string;
  unit: string;
}>;
  rows: number;
};
  dimensions: CatalogDimension[];
  mviews: CatalogMView[];
  cuboids?: CatalogCuboid[];
  epoch: number;
}

export interface Member {
  key: string | number | null;
  label: string;
}

export interface MembersPage {
  dimension: string;
  level: string;
  parent?: string | number | null;
  page: number;
  page_size: number;
  total: number;
  members: Member[];
}

export interface ErrorBody {
  error: string;
  field?: string;
  detail?: string;
}

export interface RefreshResponse {
  refreshed: number;
  epoch: number;
}

export interface JobStatus {
  job: string;
  status: "running" | "done" | "failed";
  report?: Record<string, unknown>;
  error?: string;
}
