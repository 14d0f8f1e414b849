/** Payload shapes of the engine's JSON API. The console renders these
 * verbatim: every number on screen comes straight from a response field. */

export interface Aggregates {
  flow_mva: number | null;
  volt_pu: number | null;
}

export interface ViolationRecord {
  element: string;
  kind: string; // v_low | v_high | thermal
  magnitude: number;
  limit: number;
}

export interface ContingencyRow {
  id: string;
  kind: string; // branch | generator
  element: string;
  critical: boolean;
  diverged: boolean;
  delta: Aggregates;
  violations: ViolationRecord[];
}

export interface CandidateRow {
  branch: string;
  reduction_pct: number | null;
  pareto: boolean;
  status: string; // converged | diverged | islanded
  depth: number;
  delta_c1: Aggregates;
}

export interface CandidatesResponse {
  contingency: string;
  method: string;
  evaluated: number;
  candidates: CandidateRow[];
  no_cts_found: boolean;
}

export interface DiffRow {
  element: string;
  kind: string;
  before: number;
  after: number;
}

export interface WhatifResponse {
  contingency: string;
  opened_branch: string;
  status: string;
  reduction_pct: number | null;
  pareto: boolean;
  delta_c0: Aggregates;
  delta_c1: Aggregates;
  diff: DiffRow[];
}

export interface CaseSummary {
  buses: number;
  branches: number;
  generators: number;
  base_mva: number;
  converged: boolean;
  losses_mw: number | null;
}

export const METHODS = ["ce", "cbce", "cbve", "dm1", "dm2", "dm3"] as const;
export type Method = (typeof METHODS)[number];
