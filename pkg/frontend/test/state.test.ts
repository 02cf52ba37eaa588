/** Pure-model tests: document mutations and view derivation. */

import { describe, expect, it } from "vitest";

import {
  addLevel,
  editFormula,
  moveColumn,
  parseSpec,
  setCollapsed,
  setKeys,
  setSort,
} from "../src/spec.js";
import { deriveView, initialState, type UiState } from "../src/state.js";
import { fixtureText } from "./helpers.js";

const spec = () => parseSpec(fixtureText("places_base"));

describe("document mutations", () => {
  it("never mutate their input", () => {
    const original = spec();
    const snapshot = JSON.stringify(original);
    editFormula(original, "City", "[County Name]");
    moveColumn(original, "Population", 1);
    setKeys(original, 1, ["State"]);
    setCollapsed(original, 0, true);
    setSort(original, 1, "County", "desc");
    addLevel(original, 1);
    expect(JSON.stringify(original)).toBe(snapshot);
  });

  it("reject unknown columns and out-of-range levels", () => {
    expect(() => editFormula(spec(), "Nope", "1")).toThrow(/unknown column/);
    expect(() => moveColumn(spec(), "City", 9)).toThrow(/out of range/);
    expect(() => setKeys(spec(), 1, ["Nope"])).toThrow(/unknown column/);
  });

  it("adding a level shifts residency above the insertion point", () => {
    const next = addLevel(spec(), 1);
    expect(next.levels).toHaveLength(5);
    expect(next.columns["City"]!.resident_level).toBe(0);
    expect(next.columns["County Pop"]!.resident_level).toBe(2);
    expect(next.columns["Total Pop"]!.resident_level).toBe(4);
  });
});

describe("view derivation", () => {
  const state: UiState = {
    ...initialState(spec()),
    dirty: false,
    compile: {
      sql: "SELECT 1",
      diagnostics: { City: ["bad reference"] },
      compile_ms: 1,
    },
    results: {
      session: "s",
      columns: [
        { name: "City", type: "Text" },
        { name: "Population", type: "Number" },
        { name: "Population (multiple values)", type: "Bool" },
      ],
      rows: [
        ["Portland", 650, false],
        ["Seattle", null, true],
      ],
      annotations: {
        multi_value_flags: { Population: "Population (multiple values)" },
      },
      from_cache: false,
    },
  };

  it("is deterministic over (spec, response)", () => {
    expect(deriveView(state)).toEqual(deriveView({ ...state }));
  });

  it("hides flag columns and turns them into cell badges", () => {
    const view = deriveView(state);
    expect(view.headers.map((h) => h.name)).toEqual(["City", "Population"]);
    expect(view.rows[0]![1]!.multiValueBadge).toBe(false);
    expect(view.rows[1]![1]!.multiValueBadge).toBe(true);
  });

  it("marks diagnosed columns with an error badge", () => {
    const view = deriveView(state);
    expect(view.headers[0]).toMatchObject({
      name: "City",
      errorBadge: true,
      messages: ["bad reference"],
    });
    expect(view.headers[1]!.errorBadge).toBe(false);
  });

  it("shows the selected column's formula in the formula bar", () => {
    const selected = { ...state, selection: { column: "County Pop" } };
    expect(deriveView(selected).formulaBar).toBe("Sum([Population])");
    const editing = {
      ...selected,
      pendingEdit: { column: "County Pop", text: "Avg([Pop" },
    };
    expect(deriveView(editing).formulaBar).toBe("Avg([Pop");
  });
});
