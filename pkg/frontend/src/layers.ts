/** SVG map pane: infrastructure lines, labeled towers, component layers. */

import { ComponentCollection, InfraLine, TowerRow } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export const COMPONENT_PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
  "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
];

export function componentColor(c: number): string {
  return COMPONENT_PALETTE[c % COMPONENT_PALETTE.length] ?? "#333333";
}

const LABEL_COLORS: Record<string, string> = {
  highway: "#d62728",
  metro_surface: "#2ca02c",
  metro_underground: "#9467bd",
  none: "#bbbbbb",
};

export function labelColor(label: string): string {
  return LABEL_COLORS[label] ?? "#bbbbbb";
}

export interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

export function boundsOf(points: Iterable<{ lat: number; lon: number }>): Bounds {
  let minLat = Infinity, maxLat = -Infinity, minLon = Infinity, maxLon = -Infinity;
  for (const p of points) {
    minLat = Math.min(minLat, p.lat);
    maxLat = Math.max(maxLat, p.lat);
    minLon = Math.min(minLon, p.lon);
    maxLon = Math.max(maxLon, p.lon);
  }
  if (!Number.isFinite(minLat)) {
    return { minLat: -1, maxLat: 1, minLon: -1, maxLon: 1 };
  }
  return { minLat, maxLat, minLon, maxLon };
}

/** Marker radius: strictly increasing in weight (sqrt area scaling). */
export function markerRadius(weight: number, maxWeight: number,
                             rMin = 2, rMax = 14): number {
  if (maxWeight <= 0 || weight <= 0) return rMin;
  return rMin + (rMax - rMin) * Math.sqrt(weight / maxWeight);
}

export class MapView {
  readonly svg: SVGSVGElement;
  private bounds: Bounds = { minLat: -1, maxLat: 1, minLon: -1, maxLon: 1 };
  private readonly infraGroup: SVGGElement;
  private readonly towersGroup: SVGGElement;
  private readonly componentsGroup: SVGGElement;
  private readonly noticeHost: HTMLElement;

  constructor(container: HTMLElement,
              private readonly width = 720,
              private readonly height = 520) {
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    this.svg.setAttribute("class", "map-view");
    this.infraGroup = this.group("infrastructure");
    this.towersGroup = this.group("tower-labels");
    this.componentsGroup = this.group("components");
    container.appendChild(this.svg);
    this.noticeHost = document.createElement("div");
    this.noticeHost.className = "map-notices";
    container.appendChild(this.noticeHost);
  }

  private group(name: string): SVGGElement {
    const g = document.createElementNS(SVG_NS, "g");
    g.setAttribute("data-role", name);
    this.svg.appendChild(g);
    return g;
  }

  setBounds(bounds: Bounds): void {
    const padLat = (bounds.maxLat - bounds.minLat || 0.01) * 0.05;
    const padLon = (bounds.maxLon - bounds.minLon || 0.01) * 0.05;
    this.bounds = {
      minLat: bounds.minLat - padLat,
      maxLat: bounds.maxLat + padLat,
      minLon: bounds.minLon - padLon,
      maxLon: bounds.maxLon + padLon,
    };
  }

  project(lat: number, lon: number): [number, number] {
    const { minLat, maxLat, minLon, maxLon } = this.bounds;
    const x = ((lon - minLon) / (maxLon - minLon)) * this.width;
    const y = ((maxLat - lat) / (maxLat - minLat)) * this.height;
    return [x, y];
  }

  renderInfrastructure(lines: InfraLine[]): void {
    this.infraGroup.replaceChildren();
    for (const line of lines) {
      const points = line.coordinates
        .map(([lon, lat]) => this.project(lat, lon).join(","))
        .join(" ");
      const poly = document.createElementNS(SVG_NS, "polyline");
      poly.setAttribute("points", points);
      poly.setAttribute("fill", "none");
      poly.setAttribute("stroke", labelColor(line.kind));
      poly.setAttribute("stroke-width", "2");
      poly.setAttribute("stroke-dasharray", line.kind === "metro_surface" ? "6,3" : "");
      poly.setAttribute("data-kind", line.kind);
      this.infraGroup.appendChild(poly);
    }
  }

  renderTowerLabels(towers: TowerRow[]): void {
    this.towersGroup.replaceChildren();
    for (const tower of towers) {
      const [x, y] = this.project(tower.lat, tower.lon);
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(x));
      dot.setAttribute("cy", String(y));
      dot.setAttribute("r", "2");
      dot.setAttribute("fill", labelColor(tower.display_label));
      dot.setAttribute("data-tower", tower.tower_id);
      dot.setAttribute("data-label", tower.display_label);
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `${tower.tower_id} (${tower.display_label})`;
      dot.appendChild(title);
      this.towersGroup.appendChild(dot);
    }
  }

  /** Build one component layer; not attached until swapped in. */
  buildComponentLayer(collection: ComponentCollection): SVGGElement {
    const layer = document.createElementNS(SVG_NS, "g");
    layer.setAttribute("data-component", String(collection.component));
    layer.setAttribute("class", "component-layer");
    const color = componentColor(collection.component);
    const maxWeight = collection.features.reduce(
      (top, f) => Math.max(top, f.properties.weight), 0);
    for (const feature of collection.features) {
      const [lon, lat] = feature.geometry.coordinates;
      const [x, y] = this.project(lat, lon);
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(x));
      dot.setAttribute("cy", String(y));
      dot.setAttribute("r", String(markerRadius(feature.properties.weight, maxWeight)));
      dot.setAttribute("fill", color);
      dot.setAttribute("fill-opacity", "0.55");
      dot.setAttribute("data-tower", feature.properties.tower_id);
      dot.setAttribute("data-weight", String(feature.properties.weight));
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent =
        `${feature.properties.tower_id}: ${feature.properties.weight.toFixed(4)}`;
      dot.appendChild(title);
      layer.appendChild(dot);
    }
    return layer;
  }

  /** Replace all component layers in one DOM operation (atomic swap). */
  setComponentLayers(collections: ComponentCollection[]): void {
    const layers = collections.map((c) => this.buildComponentLayer(c));
    this.componentsGroup.replaceChildren(...layers);
    this.noticeHost.replaceChildren();
    for (const collection of collections) {
      if (collection.degenerate || collection.features.length === 0) {
        const notice = document.createElement("p");
        notice.className = "empty-layer-notice";
        notice.textContent =
          `component ${collection.component} has no weighted towers`;
        this.noticeHost.appendChild(notice);
      }
    }
  }

  componentLayers(): SVGGElement[] {
    return Array.from(
      this.componentsGroup.querySelectorAll<SVGGElement>("g.component-layer"));
  }

  /** Dim every component layer except the selected one (null shows all). */
  highlightComponent(c: number | null): void {
    for (const layer of this.componentLayers()) {
      const mine = Number(layer.getAttribute("data-component"));
      layer.setAttribute("opacity", c === null || mine === c ? "1" : "0.12");
    }
  }

  setLayerVisibility(role: "infrastructure" | "tower-labels" | "components",
                     visible: boolean): void {
    const target = this.svg.querySelector(`g[data-role="${role}"]`);
    if (target) target.setAttribute("display", visible ? "inline" : "none");
  }
}
