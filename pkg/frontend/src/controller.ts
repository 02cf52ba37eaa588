/**
 * Single-threaded edit controller.
 *
 * Every edit produces a full new worksheet document, which is compiled
 * and queried through the HTTP API. Requests carry a monotonically
 * increasing id; a response whose id is no longer current is dropped on
 * the floor, so rapid consecutive edits can never render stale results.
 * The server enforces the same contract on its side by superseding the
 * older in-flight query (409).
 */

import { ApiClient, ApiError } from "./api.js";
import type { LevelAction, WorksheetSpec } from "./spec.js";
import { applyLevelAction, editFormula } from "./spec.js";
import type { UiState, ViewModel } from "./state.js";
import { deriveView, initialState } from "./state.js";

export interface ControllerOptions {
  session?: string;
  dialect?: string;
  onRender?: (view: ViewModel) => void;
}

export class WorksheetController {
  state: UiState;
  readonly session: string;
  private requestId = 0;
  private readonly onRender: (view: ViewModel) => void;

  constructor(
    private readonly client: ApiClient,
    spec: WorksheetSpec,
    options: ControllerOptions = {},
  ) {
    this.state = initialState(spec, options.dialect ?? "ansi");
    this.session =
      options.session ?? `ui-${Math.random().toString(36).slice(2)}`;
    this.onRender = options.onRender ?? (() => undefined);
  }

  get view(): ViewModel {
    return deriveView(this.state);
  }

  private render(): void {
    this.onRender(this.view);
  }

  /** Compile and query the current document; drop stale responses. */
  async refresh(): Promise<void> {
    const id = ++this.requestId;
    const spec = this.state.spec;
    this.state = { ...this.state, dirty: true };
    this.render();

    let next: Partial<UiState>;
    try {
      const [compile, results] = await Promise.all([
        this.client.compile(spec, this.state.dialect),
        this.client.query(spec, { session: this.session }),
      ]);
      next = { compile, results, banner: undefined };
    } catch (error) {
      if (error instanceof ApiError && error.superseded) {
        return; // a newer edit owns the screen now
      }
      if (error instanceof ApiError) {
        // keep the last good results; surface the failure, retain edit
        next = { banner: error.message };
      } else {
        throw error;
      }
    }
    if (id !== this.requestId) {
      return; // stale: a newer edit was issued while we waited
    }
    this.state = { ...this.state, ...next, dirty: false };
    this.render();
  }

  async editFormula(column: string, text: string): Promise<void> {
    const edit = { column, text };
    this.state = {
      ...this.state,
      spec: editFormula(this.state.spec, column, text),
      pendingEdit: edit,
      selection: { column },
    };
    await this.refresh();
    // clear only our own accepted edit; never touch a newer one's
    if (!this.state.banner && this.state.pendingEdit === edit) {
      this.state = { ...this.state, pendingEdit: undefined };
      this.render();
    }
  }

  async manipulateLevels(action: LevelAction): Promise<void> {
    this.state = {
      ...this.state,
      spec: applyLevelAction(this.state.spec, action),
    };
    await this.refresh();
  }

  async setDialect(dialect: string): Promise<void> {
    this.state = { ...this.state, dialect };
    await this.refresh();
  }

  select(column: string, row?: number): void {
    this.state = { ...this.state, selection: { column, row } };
    this.render();
  }
}
