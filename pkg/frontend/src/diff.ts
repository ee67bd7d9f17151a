/** Plan diff rows: reference vs recommended counts per (sort pair, trailer
 * type), restoration badges, and the comparison chips. Every number is
 * copied from a service response field; the only arithmetic here is integer
 * subtraction for displayed deltas. */

import type { CompareResponse, CountEntry, SolutionDoc } from "./types.js";

export interface DiffRow {
  sortPair: string;
  trailerType: string;
  reference: number;
  planned: number;
  delta: number;
  addedByRestoration: number;
}

function countMap(entries: CountEntry[] | undefined | null): Map<string, number> {
  const map = new Map<string, number>();
  for (const e of entries ?? []) {
    map.set(`${e.sort_pair}|${e.trailer_type}`, e.count);
  }
  return map;
}

/** Rows of the plan-vs-reference table for one solution. */
export function planDiffRows(solution: SolutionDoc): DiffRow[] {
  const reference = countMap(solution.metrics.reference);
  const added = countMap(solution.restoration?.added);
  return solution.plan.y.map((entry) => {
    const key = `${entry.sort_pair}|${entry.trailer_type}`;
    const ref = reference.get(key) ?? 0;
    return {
      sortPair: entry.sort_pair,
      trailerType: entry.trailer_type,
      reference: ref,
      planned: entry.count,
      delta: entry.count - ref,
      addedByRestoration: added.get(key) ?? 0,
    };
  });
}

export interface BaseDiffRow {
  sortPair: string;
  trailerType: string;
  base: number;
  current: number;
  delta: number;
}

/** Per-slot count difference between a what-if solution and the base plan. */
export function diffAgainstBase(current: SolutionDoc, base: SolutionDoc): BaseDiffRow[] {
  const baseCounts = countMap(base.plan.y);
  return current.plan.y.map((entry) => {
    const key = `${entry.sort_pair}|${entry.trailer_type}`;
    const b = baseCounts.get(key) ?? 0;
    return {
      sortPair: entry.sort_pair,
      trailerType: entry.trailer_type,
      base: b,
      current: entry.count,
      delta: entry.count - b,
    };
  });
}

export interface Chips {
  cost: number;
  trailerCount: number;
  normalizedDistance: number | null;
  hammingToReference: number | null;
  restorationCostDelta: number | null;
}

/** Headline chips for one solution, verbatim from the service. */
export function solutionChips(solution: SolutionDoc): Chips {
  return {
    cost: solution.metrics.cost,
    trailerCount: solution.metrics.trailer_count,
    normalizedDistance: solution.metrics.normalized_distance ?? null,
    hammingToReference: solution.metrics.hamming_to_reference ?? null,
    restorationCostDelta: solution.restoration?.cost_delta ?? null,
  };
}

export interface CompareChips {
  delta: number;
  tvStep: number;
  costDelta: number;
}

/** Comparison chips between two solutions, verbatim from /v1/compare. */
export function compareChips(response: CompareResponse): CompareChips {
  return {
    delta: response.delta,
    tvStep: response.tv_step,
    costDelta: response.cost_delta,
  };
}

/** Cell strings exactly as the table renders them. */
export function renderDiffCells(rows: DiffRow[]): string[][] {
  return rows.map((r) => [
    r.sortPair,
    r.trailerType,
    String(r.reference),
    String(r.planned),
    r.delta > 0 ? `+${r.delta}` : String(r.delta),
    r.addedByRestoration > 0 ? `+${r.addedByRestoration} restored` : "",
  ]);
}
