/** Volume-sweep orchestration: repeated what-if calls, strictly serialized
 * (one in-flight solve), with progress reporting for the pending UI. */

import type { ApiClient } from "./api.js";
import type { WhatIfResponse } from "./types.js";

export function sweepScales(steps: number, from = 0.8, to = 1.2): number[] {
  if (steps < 1) return [];
  if (steps === 1) return [from];
  const out: number[] = [];
  for (let i = 0; i < steps; i++) {
    out.push(from + ((to - from) * i) / (steps - 1));
  }
  return out;
}

export interface SweepProgress {
  done: number;
  total: number;
  scale: number;
}

export async function runSweep(
  client: ApiClient,
  instanceId: string,
  steps: number,
  onProgress?: (p: SweepProgress) => void,
  from = 0.8,
  to = 1.2,
  timeLimitS = 30,
): Promise<WhatIfResponse[]> {
  const scales = sweepScales(steps, from, to);
  const responses: WhatIfResponse[] = [];
  for (let i = 0; i < scales.length; i++) {
    const response = await client.whatIf(instanceId, {
      global_scale: scales[i],
      per_commodity_overrides: {},
      time_limit_s: timeLimitS,
    });
    responses.push(response);
    onProgress?.({ done: i + 1, total: scales.length, scale: scales[i] });
  }
  return responses;
}
