// Explorer session state and the navigation transitions behind every control.
// Pure functions: each transition returns a new state; drill/slice/roll-up
// change the query (and re-query), pivot only reassigns presentation axes.

import type { Catalog, FilterClause, QueryDocument, QueryRequest, QueryResponse } from "./api-types.js";

export interface AxisAssignment {
  rows: string[]; // dimension names, outermost first
  cols: string[];
}

export interface ExplorerState {
  request: QueryRequest;
  axes: AxisAssignment;
  past: QueryRequest[]; // history back stack (most recent last)
  future: QueryRequest[]; // redo stack after back()
  result: QueryResponse | null;
}

export interface DimensionInfo {
  name: string;
  levels: string[]; // finest first
}

export function dimensionInfo(catalog: Catalog): Map<string, DimensionInfo> {
  const out = new Map<string, DimensionInfo>();
  for (const dim of catalog.dimensions) {
    const levels = [...dim.levels].sort((a, b) => a.ordinal - b.ordinal).map((l) => l.name);
    out.set(dim.name, { name: dim.name, levels });
  }
  return out;
}

function cloneQuery(query: QueryDocument): QueryDocument {
  return JSON.parse(JSON.stringify(query)) as QueryDocument;
}

export function initialState(groupBy: Record<string, string>, axes?: AxisAssignment): ExplorerState {
  const grouped = Object.keys(groupBy);
  return {
    request: { query: { group_by: { ...groupBy } } },
    axes: axes ?? { rows: grouped, cols: [] },
    past: [],
    future: [],
    result: null,
  };
}

function pushHistory(state: ExplorerState, request: QueryRequest): ExplorerState {
  return {
    ...state,
    request,
    past: [...state.past, state.request],
    future: [],
  };
}

/** Current level of a dimension in the request, or null when aggregated to ALL. */
export function levelOf(state: ExplorerState, dimension: string): string | null {
  return state.request.query.group_by?.[dimension] ?? null;
}

function withGroupBy(request: QueryRequest, dimension: string, level: string | null): QueryRequest {
  const query = cloneQuery(request.query);
  const groupBy = { ...(query.group_by ?? {}) };
  if (level === null) {
    delete groupBy[dimension];
  } else {
    groupBy[dimension] = level;
  }
  query.group_by = groupBy;
  return { ...request, query };
}

function addFilter(request: QueryRequest, clause: FilterClause): QueryRequest {
  const query = cloneQuery(request.query);
  const filters = [...(query.filters ?? [])];
  const existing = filters.findIndex(
    (f) => f.dimension === clause.dimension && f.level === clause.level,
  );
  if (existing >= 0) {
    const current = filters[existing]!;
    const keep = current.members.filter((m) => clause.members.includes(m));
    filters[existing] = { ...current, members: keep };
  } else {
    filters.push(clause);
  }
  query.filters = filters;
  return { ...request, query };
}

/** Can a member cell of this dimension be clicked to drill? */
export function canDrill(dims: Map<string, DimensionInfo>, state: ExplorerState, dimension: string): boolean {
  const info = dims.get(dimension);
  if (!info) return false;
  const current = levelOf(state, dimension);
  if (current === null) return true; // ALL drills into the coarsest level
  return info.levels.indexOf(current) > 0;
}

/**
 * Drill one level finer; clicking a member anchors the drill by filtering on
 * that member at the pre-drill level. Returns null when already finest
 * (control disabled, no request is issued).
 */
export function drill(
  dims: Map<string, DimensionInfo>,
  state: ExplorerState,
  dimension: string,
  member?: string | number,
): ExplorerState | null {
  const info = dims.get(dimension);
  if (!info) return null;
  const current = levelOf(state, dimension);
  let finer: string;
  if (current === null) {
    finer = info.levels[info.levels.length - 1]!;
  } else {
    const position = info.levels.indexOf(current);
    if (position <= 0) return null;
    finer = info.levels[position - 1]!;
  }
  let request = state.request;
  if (member !== undefined && current !== null) {
    request = addFilter(request, { dimension, level: current, members: [member] });
  }
  request = withGroupBy(request, dimension, finer);
  return pushHistory(state, request);
}

/** Roll one level coarser (top level steps to ALL). Null when already at ALL. */
export function rollUp(
  dims: Map<string, DimensionInfo>,
  state: ExplorerState,
  dimension: string,
): ExplorerState | null {
  const info = dims.get(dimension);
  if (!info) return null;
  const current = levelOf(state, dimension);
  if (current === null) return null;
  const position = info.levels.indexOf(current);
  const coarser = position + 1 < info.levels.length ? info.levels[position + 1]! : null;
  return pushHistory(state, withGroupBy(state.request, dimension, coarser));
}

/** Breadcrumb click: roll up repeatedly until the dimension sits at `level`. */
export function rollUpTo(
  dims: Map<string, DimensionInfo>,
  state: ExplorerState,
  dimension: string,
  level: string | null,
): ExplorerState | null {
  const info = dims.get(dimension);
  if (!info) return null;
  const current = levelOf(state, dimension);
  if (current === null) return null;
  const from = info.levels.indexOf(current);
  const to = level === null ? info.levels.length : info.levels.indexOf(level);
  if (to <= from) return null; // not a roll-up target
  let out: ExplorerState | null = state;
  for (let i = from; i < to && out !== null; i++) {
    out = rollUp(dims, out, dimension);
  }
  return out;
}

/** Member-picker apply: restrict a dimension level to the chosen members. */
export function slice(
  state: ExplorerState,
  dimension: string,
  level: string,
  members: Array<string | number>,
): ExplorerState {
  return pushHistory(state, addFilter(state.request, { dimension, level, members }));
}

/** Presentation-only: move a grouped dimension between row and column axes. */
export function assignAxes(state: ExplorerState, axes: AxisAssignment): ExplorerState {
  return { ...state, axes }; // no history entry, no re-query
}

export function back(state: ExplorerState): ExplorerState | null {
  const previous = state.past[state.past.length - 1];
  if (previous === undefined) return null;
  return {
    ...state,
    request: previous,
    past: state.past.slice(0, -1),
    future: [state.request, ...state.future],
  };
}

export function forward(state: ExplorerState): ExplorerState | null {
  const next = state.future[0];
  if (next === undefined) return null;
  return {
    ...state,
    request: next,
    past: [...state.past, state.request],
    future: state.future.slice(1),
  };
}

export function withResult(state: ExplorerState, result: QueryResponse): ExplorerState {
  return { ...state, result };
}

/** Keep the axis assignment a partition of the currently grouped dimensions. */
export function reconcileAxes(state: ExplorerState): ExplorerState {
  const grouped = Object.keys(state.request.query.group_by ?? {});
  const rows = state.axes.rows.filter((d) => grouped.includes(d));
  const cols = state.axes.cols.filter((d) => grouped.includes(d));
  for (const dim of grouped) {
    if (!rows.includes(dim) && !cols.includes(dim)) rows.push(dim);
  }
  return { ...state, axes: { rows, cols } };
}

/** Breadcrumb trail for one dimension: ALL plus each coarser-or-current level. */
export function breadcrumbs(
  dims: Map<string, DimensionInfo>,
  state: ExplorerState,
  dimension: string,
): Array<{ label: string; level: string | null; current: boolean }> {
  const info = dims.get(dimension);
  if (!info) return [];
  const current = levelOf(state, dimension);
  const trail: Array<{ label: string; level: string | null; current: boolean }> = [
    { label: "ALL", level: null, current: current === null },
  ];
  if (current === null) return trail;
  const position = info.levels.indexOf(current);
  for (let i = info.levels.length - 1; i >= position; i--) {
    const level = info.levels[i]!;
    trail.push({ label: level, level, current: i === position });
  }
  return trail;
}
