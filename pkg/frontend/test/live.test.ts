/** End-to-end controller behavior against a real service: badges,
 * level manipulation, formula edits, and diagnostics rendering. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { WorksheetController } from "../src/controller.js";
import { renderHtml } from "../src/render.js";
import { parseSpec } from "../src/spec.js";
import { fixtureText, startServer, type TestServer } from "./helpers.js";

let server: TestServer;
let client: ApiClient;

beforeAll(async () => {
  server = await startServer();
  client = new ApiClient(server.baseUrl);
}, 40_000);

afterAll(() => server.stop());

describe("multi-value warning", () => {
  it("badges exactly the group that collapsed distinct values", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("autoagg_rules")));
    await ui.refresh();
    const view = ui.view;
    // the flag column drives badges instead of appearing in the grid
    expect(view.headers.map((h) => h.name)).toEqual([
      "Group",
      "Value",
      "Members",
    ]);
    const valueIdx = 1;
    const badged = view.rows.map((row) => row[valueIdx]!.multiValueBadge);
    expect(badged).toEqual([false, false, true, false]);
    expect(renderHtml(view)).toContain("multi-value-badge");
  });
});

describe("level manipulation", () => {
  it("collapsing the base level changes the output grain", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_base")));
    await ui.refresh();
    expect(ui.view.rows).toHaveLength(12);
    await ui.manipulateLevels({ kind: "collapse", level: 0, collapsed: true });
    expect(ui.view.rows).toHaveLength(6);
    expect(ui.view.headers.map((h) => h.name)).toContain("County Pop");
    expect(ui.view.headers.map((h) => h.name)).not.toContain("City");
  });

  it("sorting a level descending reorders groups", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_count")));
    await ui.refresh();
    const states = () => ui.view.rows.map((r) => r[0]!.value);
    expect(states()).toEqual(["Oregon", "Washington"]);
    await ui.manipulateLevels({
      kind: "sort",
      level: 2,
      column: "State",
      direction: "desc",
    });
    expect(states()).toEqual(["Washington", "Oregon"]);
  });

  it("an illegal key set surfaces a validation banner", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_base")));
    await ui.refresh();
    const before = ui.view.rows.length;
    await ui.manipulateLevels({
      kind: "set keys",
      level: 1,
      keys: ["County Pop"],
    });
    expect(ui.view.banner).toBeTruthy();
    // the last good table stays on screen while the user corrects it
    expect(ui.view.rows).toHaveLength(before);
  });
});

describe("formula editing", () => {
  it("a valid edit refreshes grouped values", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_base")));
    await ui.refresh();
    await ui.editFormula("County Pop", "Max([Population])");
    const county = ui.view.headers.findIndex((h) => h.name === "County Pop");
    expect(ui.view.rows[0]![county]!.value).toBe(40); // Clackamas max
    expect(ui.view.banner).toBeUndefined();
  });

  it("a broken formula renders an error badge and keeps the table", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_base")));
    await ui.refresh();
    await ui.editFormula("County Pop", "[County Pop] + [Total Pop]");
    const header = ui.view.headers.find((h) => h.name === "Total Pop");
    expect(header).toBeDefined();
    const flooded = ui.view.headers.filter((h) => h.errorBadge);
    expect(flooded.length).toBeGreaterThan(0);
    expect(renderHtml(ui.view)).toContain("error-badge");
  });

  it("the totals strip shows grand totals once", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_base")));
    await ui.refresh();
    expect(ui.view.totals).toEqual([{ name: "Total Pop", value: 2213 }]);
  });
});

describe("purity", () => {
  it("replaying the same state reproduces the identical view", async () => {
    const ui = new WorksheetController(client, parseSpec(fixtureText("places_count")));
    await ui.refresh();
    const replayed = new WorksheetController(client, ui.state.spec);
    replayed.state = { ...ui.state };
    expect(renderHtml(replayed.view)).toBe(renderHtml(ui.view));
  });
});
