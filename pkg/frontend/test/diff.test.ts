import { describe, expect, it } from "vitest";

import {
  compareChips,
  diffAgainstBase,
  planDiffRows,
  renderDiffCells,
  solutionChips,
} from "../src/diff.js";
import {
  baseSolve,
  compareScaled,
  compareSelf,
  whatIfIdentity,
  whatIfScaled,
} from "./fixtures.js";

describe("plan diff rows", () => {
  it("copies every planned count verbatim from the service plan", () => {
    const rows = planDiffRows(baseSolve.solution);
    expect(rows.length).toBe(baseSolve.solution.plan.y.length);
    for (let i = 0; i < rows.length; i++) {
      const entry = baseSolve.solution.plan.y[i];
      expect(rows[i].sortPair).toBe(entry.sort_pair);
      expect(rows[i].trailerType).toBe(entry.trailer_type);
      expect(rows[i].planned).toBe(entry.count);
    }
  });

  it("copies reference counts from the service metrics", () => {
    const rows = planDiffRows(baseSolve.solution);
    const reference = new Map(
      (baseSolve.solution.metrics.reference ?? []).map((e) => [
        `${e.sort_pair}|${e.trailer_type}`,
        e.count,
      ]),
    );
    for (const row of rows) {
      expect(row.reference).toBe(reference.get(`${row.sortPair}|${row.trailerType}`) ?? 0);
      expect(row.delta).toBe(row.planned - row.reference);
    }
  });

  it("flags restoration additions from the report", () => {
    const added = whatIfScaled.solution.restoration?.added ?? [];
    const rows = planDiffRows(whatIfScaled.solution);
    for (const add of added) {
      const row = rows.find(
        (r) => r.sortPair === add.sort_pair && r.trailerType === add.trailer_type,
      );
      expect(row).toBeDefined();
      expect(row!.addedByRestoration).toBe(add.count);
    }
  });

  it("renders cell strings that match the service numbers exactly", () => {
    const rows = planDiffRows(baseSolve.solution);
    const cells = renderDiffCells(rows);
    for (let i = 0; i < rows.length; i++) {
      expect(cells[i][2]).toBe(String(rows[i].reference));
      expect(cells[i][3]).toBe(String(baseSolve.solution.plan.y[i].count));
    }
  });
});

describe("identity what-if", () => {
  it("renders an all-zero diff against the base solve", () => {
    const rows = diffAgainstBase(whatIfIdentity.solution, baseSolve.solution);
    expect(rows.length).toBeGreaterThan(0);
    for (const row of rows) {
      expect(row.delta).toBe(0);
      expect(row.current).toBe(row.base);
    }
  });

  it("shares the base solve's solution id", () => {
    expect(whatIfIdentity.solution_id).toBe(baseSolve.solution_id);
  });
});

describe("chips", () => {
  it("solution chips equal the service metrics verbatim", () => {
    const chips = solutionChips(baseSolve.solution);
    expect(chips.cost).toBe(baseSolve.solution.metrics.cost);
    expect(chips.trailerCount).toBe(baseSolve.solution.metrics.trailer_count);
    expect(chips.normalizedDistance).toBe(
      baseSolve.solution.metrics.normalized_distance ?? null,
    );
    expect(chips.hammingToReference).toBe(
      baseSolve.solution.metrics.hamming_to_reference ?? null,
    );
  });

  it("compare chips are verbatim service values", () => {
    const chips = compareChips(compareScaled);
    expect(chips.delta).toBe(compareScaled.delta);
    expect(chips.tvStep).toBe(compareScaled.tv_step);
    expect(chips.costDelta).toBe(compareScaled.cost_delta);
  });

  it("self-comparison renders zeros", () => {
    const chips = compareChips(compareSelf);
    expect(chips.delta).toBe(0);
    expect(chips.tvStep).toBe(0);
    expect(chips.costDelta).toBe(0);
  });
});
