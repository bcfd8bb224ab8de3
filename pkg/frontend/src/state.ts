/** View state, fully round-trippable through the URL query string. */

export const K_MIN = 1;
export const K_MAX = 16;

export interface LayerVisibility {
  components: boolean;
  towerLabels: boolean;
  infrastructure: boolean;
}

export interface ViewState {
  k: number;
  selectedComponent: number | null;
  layers: LayerVisibility;
  heatmapN: number;
  heatmapSeed: number;
  pendingJobId: string | null;
}

export function defaultState(k = 8): ViewState {
  return {
    k: clampK(k),
    selectedComponent: null,
    layers: { components: true, towerLabels: false, infrastructure: true },
    heatmapN: 500,
    heatmapSeed: 0,
    pendingJobId: null,
  };
}

export function clampK(k: number): number {
  if (!Number.isFinite(k)) return K_MIN;
  return Math.min(K_MAX, Math.max(K_MIN, Math.round(k)));
}

/** Keep the selected component consistent with the current k. */
export function selectComponent(state: ViewState, c: number | null): ViewState {
  if (c === null || c < 0 || c >= state.k) {
    return { ...state, selectedComponent: null };
  }
  return { ...state, selectedComponent: Math.floor(c) };
}

export function withK(state: ViewState, k: number): ViewState {
  const next = { ...state, k: clampK(k) };
  return selectComponent(next, next.selectedComponent);
}

export function toQuery(state: ViewState): string {
  const params = new URLSearchParams();
  params.set("k", String(state.k));
  if (state.selectedComponent !== null) {
    params.set("c", String(state.selectedComponent));
  }
  const off: string[] = [];
  if (!state.layers.components) off.push("components");
  if (!state.layers.towerLabels) off.push("labels");
  if (!state.layers.infrastructure) off.push("infra");
  if (off.length) params.set("hide", off.join(","));
  params.set("hn", String(state.heatmapN));
  params.set("hs", String(state.heatmapSeed));
  if (state.pendingJobId) params.set("job", state.pendingJobId);
  return params.toString();
}

export function fromQuery(query: string): ViewState {
  const params = new URLSearchParams(query);
  const state = defaultState(Number(params.get("k") ?? "8"));
  const hidden = new Set((params.get("hide") ?? "").split(",").filter(Boolean));
  state.layers = {
    components: !hidden.has("components"),
    towerLabels: !hidden.has("labels"),
    infrastructure: !hidden.has("infra"),
  };
  if (params.has("hn")) state.heatmapN = Math.max(1, Number(params.get("hn")));
  if (params.has("hs")) state.heatmapSeed = Number(params.get("hs"));
  if (params.has("job")) state.pendingJobId = params.get("job");
  if (params.has("c")) {
    return selectComponent(state, Number(params.get("c")));
  }
  return state;
}
