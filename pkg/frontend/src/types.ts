/** Wire types of the /v1 JSON API. Field names mirror the service exactly;
 * the console never recomputes any of these values. */

export interface NodeDoc {
  terminal: string;
  sort: string;
  day: number;
}

export interface SortPairDoc {
  id: string;
  origin: NodeDoc;
  destination: NodeDoc;
  allowed_trailers: string[];
  load_pair: string | null;
}

export interface TrailerTypeDoc {
  id: string;
  capacity: number;
  cost: number;
}

export interface CommodityDoc {
  id: string;
  volume: number;
  service_class: string;
  primary: string;
  alternates: string[];
  alt_distance: Record<string, number>;
}

export interface CountEntry {
  sort_pair: string;
  trailer_type: string;
  count: number;
}

export interface InstanceDoc {
  sort_pairs: SortPairDoc[];
  trailer_types: TrailerTypeDoc[];
  commodities: CommodityDoc[];
  reference_plan: CountEntry[] | null;
}

export interface FlowEntry {
  commodity: string;
  sort_pair: string;
  trailer_type: string;
  volume: number;
}

export interface PlanDoc {
  y: CountEntry[];
  x: FlowEntry[];
  objective: number;
}

export interface SolutionMetrics {
  cost: number;
  total_volume: number;
  trailer_count: number;
  hamming_to_reference?: number;
  normalized_distance?: number;
  reference?: CountEntry[];
}

export interface RestorationEntry {
  sort_pair: string;
  violation: number;
  extra_capacity: number;
  trailer_type: string;
  selected: boolean;
}

export interface RestorationDoc {
  violated: RestorationEntry[];
  added: CountEntry[];
  cost_delta: number;
}

export interface SolutionDoc {
  id: string;
  instance_id: string;
  mode: string;
  seed: number;
  plan: PlanDoc;
  metrics: SolutionMetrics;
  restoration: RestorationDoc | null;
  timings: Record<string, number>;
}

export interface SolveResponse {
  solution_id: string;
  solution: SolutionDoc;
}

export interface WhatIfResponse {
  derived_instance_id: string;
  solution_id: string;
  solution: SolutionDoc;
}

export interface CompareResponse {
  a: string;
  b: string;
  delta: number;
  tv_step: number;
  cost_delta: number;
}

export interface WhatIfRequest {
  global_scale: number;
  per_commodity_overrides: Record<string, number>;
  time_limit_s?: number;
  seed?: number;
}
