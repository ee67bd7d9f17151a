/** Console state round-trips through the URL hash so a what-if scenario is
 * shareable as a link. */

export type View = "instances" | "whatif" | "sweep";

export interface ConsoleState {
  view: View;
  instanceId: string | null;
  scale: number;
  overrides: Record<string, number>;
}

export const DEFAULT_STATE: ConsoleState = {
  view: "instances",
  instanceId: null,
  scale: 1.0,
  overrides: {},
};

const VIEWS: View[] = ["instances", "whatif", "sweep"];

export function encodeState(state: ConsoleState): string {
  const params = new URLSearchParams();
  params.set("view", state.view);
  if (state.instanceId) params.set("instance", state.instanceId);
  if (state.scale !== 1.0) params.set("scale", String(state.scale));
  const keys = Object.keys(state.overrides).sort();
  if (keys.length > 0) {
    const ordered: Record<string, number> = {};
    for (const k of keys) ordered[k] = state.overrides[k];
    params.set("overrides", btoa(JSON.stringify(ordered)));
  }
  return `#${params.toString()}`;
}

export function decodeState(hash: string): ConsoleState {
  const raw = hash.startsWith("#") ? hash.slice(1) : hash;
  const params = new URLSearchParams(raw);
  const state: ConsoleState = { ...DEFAULT_STATE, overrides: {} };
  const view = params.get("view");
  if (view && (VIEWS as string[]).includes(view)) state.view = view as View;
  state.instanceId = params.get("instance");
  const scale = params.get("scale");
  if (scale !== null) {
    const parsed = Number(scale);
    if (Number.isFinite(parsed) && parsed >= 0) state.scale = parsed;
  }
  const overrides = params.get("overrides");
  if (overrides) {
    try {
      const doc = JSON.parse(atob(overrides)) as Record<string, unknown>;
      for (const [k, v] of Object.entries(doc)) {
        if (typeof v === "number" && Number.isFinite(v) && v >= 0) {
          state.overrides[k] = v;
        }
      }
    } catch {
      // malformed share links degrade to no overrides
    }
  }
  return state;
}
