/** Step-line chart geometry. Trailer counts are integers, so sweep series
 * render as horizontal steps; the data points come one-to-one from what-if
 * responses with no resampling. */

import type { WhatIfResponse } from "./types.js";

export interface SweepPoint {
  totalVolume: number;
  value: number;
  solutionId: string;
}

/** One chart series from a list of what-if responses (already in sweep
 * order). ``pick`` selects the plotted value from each solution. */
export function sweepSeries(
  responses: WhatIfResponse[],
  pick: (r: WhatIfResponse) => number,
): SweepPoint[] {
  return responses.map((r) => ({
    totalVolume: r.solution.metrics.total_volume,
    value: pick(r),
    solutionId: r.solution_id,
  }));
}

export function costSeries(responses: WhatIfResponse[]): SweepPoint[] {
  return sweepSeries(responses, (r) => r.solution.metrics.cost);
}

export function trailerCountSeries(responses: WhatIfResponse[]): SweepPoint[] {
  return sweepSeries(responses, (r) => r.solution.metrics.trailer_count);
}

export function slotCountSeries(
  responses: WhatIfResponse[],
  sortPair: string,
  trailerType: string,
): SweepPoint[] {
  return sweepSeries(responses, (r) => {
    const entry = r.solution.plan.y.find(
      (e) => e.sort_pair === sortPair && e.trailer_type === trailerType,
    );
    return entry ? entry.count : 0;
  });
}

/** Constant series of the reference plan's total trailer count, one point
 * per sweep step (the service reports the reference alongside each
 * solution's metrics). */
export function referenceCountSeries(responses: WhatIfResponse[]): SweepPoint[] {
  return sweepSeries(responses, (r) =>
    (r.solution.metrics.reference ?? []).reduce((acc, e) => acc + e.count, 0),
  );
}

export interface ChartBox {
  width: number;
  height: number;
  padding: number;
}

export interface Scale {
  (value: number): number;
}

export function linearScale(
  domainMin: number,
  domainMax: number,
  rangeMin: number,
  rangeMax: number,
): Scale {
  const span = domainMax - domainMin;
  if (span === 0) {
    const mid = (rangeMin + rangeMax) / 2;
    return () => mid;
  }
  return (v: number) => rangeMin + ((v - domainMin) / span) * (rangeMax - rangeMin);
}

/** SVG path with step-after semantics: hold each value until the next
 * measured volume. Returns "" for an empty series. */
export function stepPath(points: SweepPoint[], box: ChartBox): string {
  if (points.length === 0) return "";
  const xs = points.map((p) => p.totalVolume);
  const ys = points.map((p) => p.value);
  const x = linearScale(Math.min(...xs), Math.max(...xs), box.padding, box.width - box.padding);
  const y = linearScale(
    Math.min(0, Math.min(...ys)),
    Math.max(1, Math.max(...ys)),
    box.height - box.padding,
    box.padding,
  );
  const parts = [`M ${x(xs[0]).toFixed(2)} ${y(ys[0]).toFixed(2)}`];
  for (let i = 1; i < points.length; i++) {
    parts.push(`H ${x(xs[i]).toFixed(2)}`);
    parts.push(`V ${y(ys[i]).toFixed(2)}`);
  }
  return parts.join(" ");
}
