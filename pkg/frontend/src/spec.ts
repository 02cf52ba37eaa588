/**
 * Client-side worksheet document model.
 *
 * The UI never computes results itself: every manipulation here is a
 * pure function producing a complete new document, which the controller
 * posts to the server. Validation beyond basic structure is the
 * server's job; these helpers only reject edits that could not be
 * expressed as a document at all.
 */

export type SortDirection = "asc" | "desc";

export interface LevelDef {
  keys: string[];
  ordering?: [string, SortDirection][];
  collapsed?: boolean;
}

export interface ColumnDef {
  formula: string;
  resident_level: number;
  hidden?: boolean;
  format?: string;
}

export interface PageDef {
  limit: number;
  offset?: number;
}

export interface WorksheetSpec {
  inputs: unknown[];
  levels: LevelDef[];
  columns: Record<string, ColumnDef>;
  filters?: unknown[];
  parameters?: unknown[];
  page?: PageDef;
}

export function parseSpec(text: string): WorksheetSpec {
  return JSON.parse(text) as WorksheetSpec;
}

export function serializeSpec(spec: WorksheetSpec): string {
  return JSON.stringify(spec);
}

function clone(spec: WorksheetSpec): WorksheetSpec {
  return JSON.parse(JSON.stringify(spec)) as WorksheetSpec;
}

function requireColumn(spec: WorksheetSpec, column: string): void {
  if (!(column in spec.columns)) {
    throw new Error(`unknown column ${JSON.stringify(column)}`);
  }
}

function requireLevel(spec: WorksheetSpec, level: number): void {
  if (level < 0 || level >= spec.levels.length) {
    throw new Error(`level ${level} out of range`);
  }
}

/** Replace one column's formula. */
export function editFormula(
  spec: WorksheetSpec,
  column: string,
  formula: string,
): WorksheetSpec {
  requireColumn(spec, column);
  const next = clone(spec);
  next.columns[column]!.formula = formula;
  return next;
}

/** Insert a new grouping level before `index` (columns resident at or
 * above the insertion point shift up with their levels). */
export function addLevel(spec: WorksheetSpec, index: number): WorksheetSpec {
  if (index < 0 || index > spec.levels.length) {
    throw new Error(`level ${index} out of range`);
  }
  const next = clone(spec);
  next.levels.splice(index, 0, { keys: [] });
  for (const def of Object.values(next.columns)) {
    if (def.resident_level >= index) def.resident_level += 1;
  }
  return next;
}

/** Move a column to another level (explicit-menu stand-in for drag). */
export function moveColumn(
  spec: WorksheetSpec,
  column: string,
  level: number,
): WorksheetSpec {
  requireColumn(spec, column);
  requireLevel(spec, level);
  const next = clone(spec);
  next.columns[column]!.resident_level = level;
  return next;
}

/** Replace a level's grouping keys. */
export function setKeys(
  spec: WorksheetSpec,
  level: number,
  keys: string[],
): WorksheetSpec {
  requireLevel(spec, level);
  for (const key of keys) requireColumn(spec, key);
  const next = clone(spec);
  next.levels[level]!.keys = [...keys];
  return next;
}

/** Collapse or expand a level, changing the output grain. */
export function setCollapsed(
  spec: WorksheetSpec,
  level: number,
  collapsed: boolean,
): WorksheetSpec {
  requireLevel(spec, level);
  const next = clone(spec);
  next.levels[level]!.collapsed = collapsed;
  return next;
}

/** Set (or clear, with `column === null`) a level's sort. */
export function setSort(
  spec: WorksheetSpec,
  level: number,
  column: string | null,
  direction: SortDirection = "asc",
): WorksheetSpec {
  requireLevel(spec, level);
  const next = clone(spec);
  if (column === null) {
    delete next.levels[level]!.ordering;
  } else {
    requireColumn(spec, column);
    next.levels[level]!.ordering = [[column, direction]];
  }
  return next;
}

export type LevelAction =
  | { kind: "add level"; index: number }
  | { kind: "move column"; column: string; level: number }
  | { kind: "set keys"; level: number; keys: string[] }
  | { kind: "collapse"; level: number; collapsed: boolean }
  | {
      kind: "sort";
      level: number;
      column: string | null;
      direction?: SortDirection;
    };

export function applyLevelAction(
  spec: WorksheetSpec,
  action: LevelAction,
): WorksheetSpec {
  switch (action.kind) {
    case "add level":
      return addLevel(spec, action.index);
    case "move column":
      return moveColumn(spec, action.column, action.level);
    case "set keys":
      return setKeys(spec, action.level, action.keys);
    case "collapse":
      return setCollapsed(spec, action.level, action.collapsed);
    case "sort":
      return setSort(spec, action.level, action.column, action.direction);
  }
}
