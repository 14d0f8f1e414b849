/** Console view state and its URL projection.
 *
 * Every interactive state (which contingency is open, which candidate
 * method) lives in the query string, so an operator can share or replay a
 * session by copying the address bar.
 */

import type { CandidatesResponse, ContingencyRow, Method, WhatifResponse } from "./types";
import { METHODS } from "./types";

export type SortKey = "id" | "kind" | "flow" | "volt";

export interface WhatifFailure {
  message: string;
  status: number;
}

export interface AppState {
  board: ContingencyRow[] | null;
  boardError: string | null;
  selected: string | null;
  method: Method;
  sort: { key: SortKey; desc: boolean } | null; // null keeps the API severity order
  candidates: CandidatesResponse | null;
  candidatesError: string | null;
  candidatesLoading: boolean;
  whatif: WhatifResponse | null;
  whatifError: WhatifFailure | null;
  whatifLoading: boolean;
}

export function initialState(): AppState {
  return {
    board: null,
    boardError: null,
    selected: null,
    method: "cbce",
    sort: null,
    candidates: null,
    candidatesError: null,
    candidatesLoading: false,
    whatif: null,
    whatifError: null,
    whatifLoading: false,
  };
}

export function stateFromQuery(search: string): { selected: string | null; method: Method } {
  const params = new URLSearchParams(search);
  const method = params.get("method");
  return {
    selected: params.get("contingency"),
    method: METHODS.includes(method as Method) ? (method as Method) : "cbce",
  };
}

export function queryFromState(state: Pick<AppState, "selected" | "method">): string {
  const params = new URLSearchParams();
  if (state.selected) params.set("contingency", state.selected);
  params.set("method", state.method);
  return `?${params.toString()}`;
}

export function sortedBoard(state: AppState): ContingencyRow[] {
  const rows = state.board ?? [];
  if (!state.sort) return rows;
  const { key, desc } = state.sort;
  const value = (row: ContingencyRow): string | number => {
    switch (key) {
      case "id":
        return row.id;
      case "kind":
        return row.kind;
      case "flow":
        return row.diverged ? Number.POSITIVE_INFINITY : (row.delta.flow_mva ?? 0);
      case "volt":
        return row.diverged ? Number.POSITIVE_INFINITY : (row.delta.volt_pu ?? 0);
    }
  };
  const sorted = [...rows].sort((a, b) => {
    const va = value(a);
    const vb = value(b);
    if (va === vb) return a.id < b.id ? -1 : 1;
    return va < vb ? -1 : 1;
  });
  if (desc) sorted.reverse();
  return sorted;
}
