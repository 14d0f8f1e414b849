/** Console wiring: one state object, four render targets, URL round-trip. */

import { ApiClient, ApiError } from "./api";
import type { Handlers } from "./render";
import { renderBoard, renderCandidates, renderDetail, renderWhatif } from "./render";
import type { SortKey } from "./state";
import { initialState, queryFromState, stateFromQuery } from "./state";
import type { Method } from "./types";

export function bootConsole(root: Document, api: ApiClient): Handlers {
  const state = initialState();
  const boardEl = root.getElementById("board")!;
  const detailEl = root.getElementById("detail")!;
  const candidatesEl = root.getElementById("candidates")!;
  const whatifEl = root.getElementById("whatif")!;
  const summaryEl = root.getElementById("case-summary");

  function redraw(): void {
    renderBoard(boardEl, state, handlers);
    renderDetail(detailEl, state);
    renderCandidates(candidatesEl, state, handlers);
    renderWhatif(whatifEl, state, handlers);
  }

  function pushUrl(): void {
    const query = queryFromState(state);
    if (typeof history !== "undefined" && `?${location.search.replace(/^\?/, "")}` !== query) {
      history.pushState(null, "", query);
    }
  }

  async function loadBoard(): Promise<void> {
    state.boardError = null;
    state.board = null;
    redraw();
    try {
      state.board = await api.contingencies(true);
    } catch (err) {
      state.boardError = err instanceof Error ? err.message : String(err);
    }
    redraw();
  }

  async function loadCandidates(): Promise<void> {
    if (!state.selected) return;
    state.candidates = null;
    state.candidatesError = null;
    state.candidatesLoading = true;
    redraw();
    try {
      state.candidates = await api.candidates(state.selected, state.method);
    } catch (err) {
      state.candidatesError = err instanceof Error ? err.message : String(err);
    }
    state.candidatesLoading = false;
    redraw();
  }

  const handlers: Handlers = {
    onSelect(id: string): void {
      state.selected = id;
      state.whatif = null;
      state.whatifError = null;
      pushUrl();
      redraw();
      void loadCandidates();
    },
    onMethod(method: Method): void {
      state.method = method;
      pushUrl();
      void loadCandidates();
    },
    onSort(key: SortKey): void {
      if (state.sort?.key === key) {
        state.sort = { key, desc: !state.sort.desc };
      } else {
        state.sort = { key, desc: true };
      }
      redraw();
    },
    onWhatif(branch: string): void {
      if (!state.selected) return;
      state.whatifError = null;
      state.whatifLoading = true;
      redraw();
      api
        .whatif(state.selected, branch)
        .then((resp) => {
          state.whatif = resp; // stays on screen for the next candidate
        })
        .catch((err) => {
          state.whatifError =
            err instanceof ApiError
              ? { message: err.message, status: err.status }
              : { message: String(err), status: 0 };
        })
        .finally(() => {
          state.whatifLoading = false;
          redraw();
        });
    },
    onRetry(): void {
      void loadBoard().then(() => {
        if (state.selected) void loadCandidates();
      });
    },
  };

  if (summaryEl) {
    api
      .caseSummary()
      .then((s) => {
        summaryEl.textContent =
          `${s.buses} buses / ${s.branches} branches / ${s.generators} generators` +
          (s.losses_mw !== null ? ` · base losses ${s.losses_mw.toFixed(1)} MW` : "");
      })
      .catch((err) => {
        summaryEl.textContent = err instanceof Error ? err.message : String(err);
      });
  }

  const fromUrl = stateFromQuery(typeof location !== "undefined" ? location.search : "");
  state.method = fromUrl.method;
  state.selected = fromUrl.selected;
  void loadBoard().then(() => {
    if (state.selected) void loadCandidates();
  });

  if (typeof window !== "undefined") {
    window.addEventListener("popstate", () => {
      const q = stateFromQuery(location.search);
      state.selected = q.selected;
      state.method = q.method;
      state.whatif = null;
      state.whatifError = null;
      redraw();
      if (state.selected) void loadCandidates();
    });
  }

  redraw();
  return handlers;
}
