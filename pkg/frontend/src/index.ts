export { ApiClient, ApiError } from "./api.js";
export type {
  CompileResponse,
  ExplainResponse,
  FetchLike,
  QueryResponse,
} from "./api.js";
export { WorksheetController } from "./controller.js";
export type { ControllerOptions } from "./controller.js";
export { renderHtml } from "./render.js";
export {
  addLevel,
  applyLevelAction,
  editFormula,
  moveColumn,
  parseSpec,
  serializeSpec,
  setCollapsed,
  setKeys,
  setSort,
} from "./spec.js";
export type { ColumnDef, LevelAction, LevelDef, WorksheetSpec } from "./spec.js";
export { deriveView, initialState } from "./state.js";
export type { UiState, ViewModel } from "./state.js";
