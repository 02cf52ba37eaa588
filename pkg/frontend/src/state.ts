/**
 * UI state and its pure projection into a view model.
 *
 * The rendered view is a function of (worksheet document, last server
 * response) and nothing else: replaying the same pair reproduces the
 * same view, which keeps reloads and time travel trivial and makes the
 * staleness contract testable.
 */

import type { CompileResponse, QueryResponse } from "./api.js";
import type { WorksheetSpec } from "./spec.js";

export interface Selection {
  column: string;
  row?: number;
}

export interface PendingEdit {
  column: string;
  text: string;
}

export interface UiState {
  spec: WorksheetSpec;
  dialect: string;
  selection?: Selection;
  /** An edit being typed; retained verbatim when the server rejects it. */
  pendingEdit?: PendingEdit;
  results?: QueryResponse;
  compile?: CompileResponse;
  /** Human-readable failure from the last request, if any. */
  banner?: string;
  /** True while an issued request has not been answered or superseded. */
  dirty: boolean;
}

export interface HeaderCell {
  name: string;
  level: number;
  /** Set when the compiler flooded this column with diagnostics. */
  errorBadge: boolean;
  messages: string[];
}

export interface BodyCell {
  value: unknown;
  /** Set when automatic aggregation collapsed multiple distinct values. */
  multiValueBadge: boolean;
}

export interface ViewModel {
  headers: HeaderCell[];
  rows: BodyCell[][];
  /** Columns resident at the totals level, rendered once in a strip. */
  totals: { name: string; value: unknown }[];
  sqlPreview: string;
  formulaBar: string;
  banner?: string;
  dirty: boolean;
}

export function initialState(spec: WorksheetSpec, dialect = "ansi"): UiState {
  return { spec, dialect, dirty: true };
}

export function deriveView(state: UiState): ViewModel {
  const { spec, results, compile } = state;
  const flags = results?.annotations.multi_value_flags ?? {};
  const flagColumns = new Set(Object.values(flags));
  const names = results ? results.columns.map((c) => c.name) : [];
  const index = new Map(names.map((n, i) => [n, i]));

  const headers: HeaderCell[] = [];
  for (const name of names) {
    if (flagColumns.has(name)) continue; // flags drive badges, not columns
    const def = spec.columns[name];
    const messages = compile?.diagnostics[name] ?? [];
    headers.push({
      name,
      level: def?.resident_level ?? 0,
      errorBadge: messages.length > 0,
      messages,
    });
  }

  const rows: BodyCell[][] = (results?.rows ?? []).map((row) =>
    headers.map((header) => {
      const flagName = flags[header.name];
      const flagIndex = flagName !== undefined ? index.get(flagName) : undefined;
      return {
        value: row[index.get(header.name)!],
        multiValueBadge: flagIndex !== undefined && !!row[flagIndex],
      };
    }),
  );

  const totalsLevel = spec.levels.length - 1;
  const firstRow = results?.rows[0];
  const totals = headers
    .filter((h) => (spec.columns[h.name]?.resident_level ?? 0) === totalsLevel)
    .map((h) => ({
      name: h.name,
      value: firstRow ? firstRow[index.get(h.name)!] : undefined,
    }));

  const selected = state.selection?.column;
  const formulaBar =
    state.pendingEdit?.text ??
    (selected ? (spec.columns[selected]?.formula ?? "") : "");

  return {
    headers,
    rows,
    totals,
    sqlPreview: compile?.sql ?? "",
    formulaBar,
    banner: state.banner,
    dirty: state.dirty,
  };
}
