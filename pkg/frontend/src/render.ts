/**
 * HTML rendering of a view model. Kept as a pure string template so it
 * runs identically in the browser and under node-based tests; the
 * browser entry point only swaps the string into the document.
 */

import type { ViewModel } from "./state.js";

function esc(value: unknown): string {
  return String(value ?? "")
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderHtml(view: ViewModel): string {
  const headers = view.headers
    .map(
      (h) =>
        `<th class="level-${h.level}${h.errorBadge ? " error" : ""}"` +
        (h.errorBadge ? ` title="${esc(h.messages.join("; "))}"` : "") +
        `>${esc(h.name)}${h.errorBadge ? ' <span class="badge error-badge">!</span>' : ""}</th>`,
    )
    .join("");

  const body = view.rows
    .map(
      (row) =>
        `<tr>${row
          .map(
            (cell) =>
              `<td>${esc(cell.value)}${
                cell.multiValueBadge
                  ? ' <span class="badge multi-value-badge" title="multiple values">⚠</span>'
                  : ""
              }</td>`,
          )
          .join("")}</tr>`,
    )
    .join("");

  const totals = view.totals
    .map((t) => `<span class="total">${esc(t.name)}: ${esc(t.value)}</span>`)
    .join(" ");

  const banner = view.banner
    ? `<div class="banner">${esc(view.banner)}</div>`
    : "";

  return [
    banner,
    `<input class="formula-bar" value="${esc(view.formulaBar)}" />`,
    `<table class="${view.dirty ? "dirty" : "fresh"}">`,
    `<thead><tr>${headers}</tr></thead>`,
    `<tbody>${body}</tbody>`,
    `</table>`,
    `<div class="totals-strip">${totals}</div>`,
    `<pre class="sql-preview">${esc(view.sqlPreview)}</pre>`,
  ].join("\n");
}
