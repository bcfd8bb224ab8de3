import { AssociationPayload, ComponentCollection, ComponentsPayload,
         TowersPayload } from "../src/api.js";

export function collection(component: number,
                           weights: Record<string, number>,
                           degenerate = false): ComponentCollection {
  let lat = -33.40 - component * 0.01;
  const features = Object.entries(weights).map(([towerId, weight], i) => ({
    type: "Feature" as const,
    geometry: {
      type: "Point" as const,
      coordinates: [-70.6 - i * 0.01, lat] as [number, number],
    },
    properties: { tower_id: towerId, weight, component },
  }));
  return { type: "FeatureCollection", component, degenerate, features };
}

export function componentsPayload(k: number,
                                  names: Record<string, string> = {}): ComponentsPayload {
  const components = [];
  for (let c = 0; c < k; c++) {
    components.push(collection(c, { [`t${c}a`]: 0.7, [`t${c}b`]: 0.3 }));
  }
  return { k, names, components };
}

export function towersPayload(): TowersPayload {
  return {
    towers: [
      { tower_id: "t0a", name: "a", lat: -33.40, lon: -70.60, indoor: false,
        underground_metro: false, labels: ["highway"], display_label: "highway" },
      { tower_id: "t0b", name: "b", lat: -33.42, lon: -70.62, indoor: false,
        underground_metro: false, labels: ["none"], display_label: "none" },
      { tower_id: "t1a", name: "c", lat: -33.44, lon: -70.64, indoor: true,
        underground_metro: true, labels: ["metro_underground"],
        display_label: "metro_underground" },
    ],
    infrastructure: [
      { kind: "highway", coordinates: [[-70.66, -33.46], [-70.58, -33.40]] },
      { kind: "metro_surface", coordinates: [[-70.66, -33.42], [-70.58, -33.38]] },
    ],
  };
}

export function associationPayload(): AssociationPayload {
  return {
    k: 2,
    rows: [
      { component: 0, label: "highway", mean_weight: 0.012, group_size: 40 },
      { component: 0, label: "metro_surface", mean_weight: 0.001, group_size: 38 },
      { component: 0, label: "none", mean_weight: 0.0005, group_size: 20 },
      { component: 1, label: "highway", mean_weight: 0.002, group_size: 40 },
      { component: 1, label: "metro_surface", mean_weight: 0.011, group_size: 38 },
      { component: 1, label: "none", mean_weight: 0.0004, group_size: 20 },
    ],
    group_sizes: { highway: 40, metro_surface: 38, none: 20 },
  };
}
