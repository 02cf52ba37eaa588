/**
 * Thin typed client for the worksheet service's HTTP/JSON API. This is
 * the UI's only data path: no local evaluation, no direct database
 * access.
 */

import type { PageDef, WorksheetSpec } from "./spec.js";
import { serializeSpec } from "./spec.js";

export interface CompileResponse {
  sql: string;
  diagnostics: Record<string, string[]>;
  compile_ms: number;
}

export interface ColumnInfo {
  name: string;
  type: string;
}

export interface QueryResponse {
  session: string;
  columns: ColumnInfo[];
  rows: unknown[][];
  annotations: { multi_value_flags: Record<string, string> };
  from_cache: boolean;
}

export interface ExplainResponse {
  stage: string;
  text: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  /** Superseded by a newer request on the same session. */
  get superseded(): boolean {
    return this.status === 409;
  }
}

export type FetchLike = (
  url: string,
  init: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

async function unwrap<T>(
  response: Awaited<ReturnType<FetchLike>>,
): Promise<T> {
  const body = (await response.json()) as Record<string, unknown>;
  if (!response.ok) {
    const message =
      typeof body.error === "string" ? body.error : `HTTP ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    }).then((r) => unwrap<T>(r));
  }

  compile(
    spec: WorksheetSpec | string,
    dialect = "ansi",
  ): Promise<CompileResponse> {
    const text = typeof spec === "string" ? spec : serializeSpec(spec);
    return this.post("/compile", { spec: text, dialect });
  }

  query(
    spec: WorksheetSpec | string,
    options: {
      session?: string;
      page?: PageDef;
      bindings?: Record<string, unknown>;
    } = {},
  ): Promise<QueryResponse> {
    const text = typeof spec === "string" ? spec : serializeSpec(spec);
    return this.post("/query", {
      spec: text,
      session: options.session,
      page: options.page,
      bindings: options.bindings,
    });
  }

  explain(session: string, stage = "sql"): Promise<ExplainResponse> {
    const params = new URLSearchParams({ session, stage });
    return this.fetchFn(`${this.baseUrl}/explain?${params}`, {}).then((r) =>
      unwrap<ExplainResponse>(r),
    );
  }

  cancel(session: string): Promise<{ cancelled: boolean }> {
    return this.post("/cancel", { session });
  }
}
