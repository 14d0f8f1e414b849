/** DOM renderers: data in, elements out. No engine math happens here; every
 * figure is a response field formatted for display. */

import type { AppState, SortKey } from "./state";
import { sortedBoard } from "./state";
import type { CandidateRow, ContingencyRow, DiffRow, Method } from "./types";
import { METHODS } from "./types";

export interface Handlers {
  onSelect(id: string): void;
  onMethod(method: Method): void;
  onSort(key: SortKey): void;
  onWhatif(branch: string): void;
  onRetry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(value: number | null, digits: number): string {
  return value === null ? "-" : value.toFixed(digits);
}

// --------------------------------------------------------------------------
// contingency board
// --------------------------------------------------------------------------

const BOARD_COLUMNS: Array<{ key: SortKey; label: string }> = [
  { key: "id", label: "contingency" },
  { key: "kind", label: "kind" },
  { key: "flow", label: "Δ flow MVA" },
  { key: "volt", label: "Δ volt pu" },
];

export function renderBoard(container: HTMLElement, state: AppState, handlers: Handlers): void {
  container.replaceChildren();
  if (state.boardError) {
    const banner = el("div", "error-banner", `API error: ${state.boardError} `);
    const retry = el("button", "retry", "retry");
    retry.addEventListener("click", handlers.onRetry);
    banner.appendChild(retry);
    container.appendChild(banner);
    return;
  }
  if (state.board === null) {
    container.appendChild(el("div", "loading", "loading contingencies..."));
    return;
  }
  if (state.board.length === 0) {
    container.appendChild(el("div", "empty-state", "system N−1 secure — no critical contingencies"));
    return;
  }
  const table = el("table", "board");
  const head = el("tr");
  for (const col of BOARD_COLUMNS) {
    const th = el("th", undefined, col.label);
    th.dataset.sort = col.key;
    if (state.sort?.key === col.key) th.classList.add(state.sort.desc ? "sorted-desc" : "sorted-asc");
    th.addEventListener("click", () => handlers.onSort(col.key));
    head.appendChild(th);
  }
  head.appendChild(el("th", undefined, ""));
  table.appendChild(head);
  for (const row of sortedBoard(state)) {
    table.appendChild(boardRow(row, state.selected, handlers));
  }
  container.appendChild(table);
}

function boardRow(row: ContingencyRow, selected: string | null, handlers: Handlers): HTMLTableRowElement {
  const tr = el("tr", row.id === selected ? "selected" : undefined);
  tr.dataset.id = row.id;
  tr.appendChild(el("td", "mono", row.id));
  tr.appendChild(el("td", undefined, row.kind));
  tr.appendChild(el("td", "num", row.diverged ? "-" : fmt(row.delta.flow_mva, 1)));
  tr.appendChild(el("td", "num", row.diverged ? "-" : fmt(row.delta.volt_pu, 4)));
  const badge = el("td");
  if (row.diverged) badge.appendChild(el("span", "badge diverged", "diverged"));
  tr.appendChild(badge);
  tr.addEventListener("click", () => handlers.onSelect(row.id));
  return tr;
}

// --------------------------------------------------------------------------
// selected contingency detail
// --------------------------------------------------------------------------

export function renderDetail(container: HTMLElement, state: AppState): void {
  container.replaceChildren();
  const row = state.board?.find((r) => r.id === state.selected);
  if (!row) {
    container.appendChild(el("div", "hint", "select a contingency to inspect it"));
    return;
  }
  const title = el("h2", undefined, `${row.kind} outage ${row.id}`);
  if (row.diverged) title.appendChild(el("span", "badge diverged", "diverged"));
  container.appendChild(title);
  container.appendChild(
    el(
      "div",
      "aggregates",
      `post-contingency violations: ${fmt(row.delta.flow_mva, 1)} MVA / ${fmt(row.delta.volt_pu, 4)} pu`,
    ),
  );
  if (row.violations.length) {
    const table = el("table", "violations");
    const head = el("tr");
    for (const label of ["element", "kind", "magnitude", "limit"]) head.appendChild(el("th", undefined, label));
    table.appendChild(head);
    for (const v of row.violations) {
      const tr = el("tr");
      tr.appendChild(el("td", "mono", v.element));
      tr.appendChild(el("td", undefined, v.kind));
      tr.appendChild(el("td", "num", v.magnitude.toFixed(v.kind === "thermal" ? 2 : 4)));
      tr.appendChild(el("td", "num", String(v.limit)));
      table.appendChild(tr);
    }
    container.appendChild(table);
  }
}

// --------------------------------------------------------------------------
// candidate panel
// --------------------------------------------------------------------------

export function renderCandidates(container: HTMLElement, state: AppState, handlers: Handlers): void {
  container.replaceChildren();
  if (!state.selected) return;

  const selector = el("div", "method-row");
  selector.appendChild(el("label", undefined, "method "));
  const select = el("select");
  select.id = "method-select";
  for (const m of METHODS) {
    const option = el("option", undefined, m);
    option.value = m;
    if (m === state.method) option.selected = true;
    select.appendChild(option);
  }
  select.addEventListener("change", () => handlers.onMethod(select.value as Method));
  selector.appendChild(select);
  container.appendChild(selector);

  if (state.candidatesError) {
    container.appendChild(el("div", "inline-error", state.candidatesError));
    return;
  }
  if (state.candidatesLoading) {
    container.appendChild(el("div", "loading", "evaluating switching candidates..."));
    return;
  }
  const resp = state.candidates;
  if (!resp) return;
  if (resp.no_cts_found || resp.candidates.length === 0) {
    container.appendChild(el("div", "empty-state", "no CTS found for this contingency"));
    return;
  }
  const table = el("table", "candidates");
  const head = el("tr");
  for (const label of ["open branch", "reduction %", "pareto", "status", "depth", ""])
    head.appendChild(el("th", undefined, label));
  table.appendChild(head);
  for (const c of resp.candidates) {
    table.appendChild(candidateRow(c, handlers));
  }
  container.appendChild(table);
  container.appendChild(
    el("div", "hint", `${resp.evaluated} candidates evaluated via ${resp.method}; click a row to try it`),
  );
}

function candidateRow(c: CandidateRow, handlers: Handlers): HTMLTableRowElement {
  const tr = el("tr", "candidate");
  tr.dataset.branch = c.branch;
  tr.appendChild(el("td", "mono", c.branch));
  tr.appendChild(el("td", "num reduction", fmt(c.reduction_pct, 1)));
  const pareto = el("td");
  if (c.pareto) pareto.appendChild(el("span", "badge pareto", "pareto"));
  tr.appendChild(pareto);
  tr.appendChild(el("td", undefined, c.status));
  tr.appendChild(el("td", "num", String(c.depth)));
  const action = el("td");
  const btn = el("button", "try", "what-if");
  btn.addEventListener("click", (event) => {
    event.stopPropagation();
    handlers.onWhatif(c.branch);
  });
  action.appendChild(btn);
  tr.appendChild(action);
  tr.addEventListener("click", () => handlers.onWhatif(c.branch));
  return tr;
}

// --------------------------------------------------------------------------
// what-if panel
// --------------------------------------------------------------------------

export function renderWhatif(container: HTMLElement, state: AppState, handlers: Handlers): void {
  container.replaceChildren();
  if (!state.selected) return;

  const form = el("div", "whatif-form");
  form.appendChild(el("label", undefined, "open branch "));
  const input = el("input");
  input.id = "whatif-branch";
  input.placeholder = "branch id";
  const go = el("button", undefined, "apply what-if");
  go.addEventListener("click", () => {
    if (input.value.trim()) handlers.onWhatif(input.value.trim());
  });
  form.appendChild(input);
  form.appendChild(go);
  container.appendChild(form);

  if (state.whatifError) {
    const blocking = el("div", "blocking-error");
    blocking.appendChild(el("strong", undefined, `cannot apply (${state.whatifError.status}): `));
    blocking.appendChild(el("span", undefined, state.whatifError.message));
    container.appendChild(blocking);
    return;
  }
  if (state.whatifLoading) {
    container.appendChild(el("div", "loading", "solving what-if state..."));
    return;
  }
  const resp = state.whatif;
  if (!resp) return;

  const title = el("h3", undefined, `opened ${resp.opened_branch} after ${resp.contingency}`);
  container.appendChild(title);
  const summary = el("div", "whatif-summary");
  summary.appendChild(el("span", "mono", `status: ${resp.status}`));
  summary.appendChild(el("span", "num", ` reduction: ${fmt(resp.reduction_pct, 1)}%`));
  if (resp.pareto) summary.appendChild(el("span", "badge pareto", "pareto"));
  container.appendChild(summary);
  container.appendChild(
    el(
      "div",
      "aggregates",
      `violations ${fmt(resp.delta_c0.flow_mva, 2)} MVA / ${fmt(resp.delta_c0.volt_pu, 4)} pu` +
        ` → ${fmt(resp.delta_c1.flow_mva, 2)} MVA / ${fmt(resp.delta_c1.volt_pu, 4)} pu`,
    ),
  );
  if (resp.status !== "converged") {
    container.appendChild(el("div", "inline-error", "post-switching state did not converge"));
    return;
  }
  if (resp.diff.length === 0) {
    container.appendChild(el("div", "empty-state", "all violations cleared"));
    return;
  }
  const table = el("table", "diff");
  const head = el("tr");
  for (const label of ["element", "kind", "before", "after", ""]) head.appendChild(el("th", undefined, label));
  table.appendChild(head);
  for (const row of resp.diff) {
    table.appendChild(diffRow(row));
  }
  container.appendChild(table);
}

function diffRow(row: DiffRow): HTMLTableRowElement {
  const digits = row.kind === "thermal" ? 2 : 5;
  const marker = row.after < row.before ? "improved" : row.after > row.before ? "worsened" : "unchanged";
  const tr = el("tr", `diff-${marker}`);
  tr.appendChild(el("td", "mono", row.element));
  tr.appendChild(el("td", undefined, row.kind));
  tr.appendChild(el("td", "num", row.before.toFixed(digits)));
  tr.appendChild(el("td", "num", row.after.toFixed(digits)));
  tr.appendChild(el("td", `marker ${marker}`, marker === "unchanged" ? "" : marker));
  return tr;
}
