import { readFileSync } from "node:fs";

import type {
  CompareResponse,
  InstanceDoc,
  SolveResponse,
  WhatIfResponse,
} from "../src/types.js";

function load<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export const instanceDoc = load<InstanceDoc>("instance");
export const upload = load<{ id: string }>("upload");
export const baseSolve = load<SolveResponse>("base_solve");
export const whatIfIdentity = load<WhatIfResponse>("whatif_identity");
export const whatIfScaled = load<WhatIfResponse>("whatif_scaled");
export const compareSelf = load<CompareResponse>("compare_self");
export const compareScaled = load<CompareResponse>("compare_scaled");
export const sweep = load<WhatIfResponse[]>("sweep");
