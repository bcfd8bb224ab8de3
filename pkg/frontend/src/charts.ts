/** Association point-plot and the residual-vs-k curve, as plain SVG. */

import { AssociationPayload, RssPoint } from "./api.js";
import { componentColor, labelColor } from "./layers.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const MARGIN = { top: 12, right: 16, bottom: 28, left: 48 };

function svgRoot(width: number, height: number, cls: string): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", cls);
  return svg;
}

function text(x: number, y: number, content: string, anchor = "middle"): SVGTextElement {
  const el = document.createElementNS(SVG_NS, "text");
  el.setAttribute("x", String(x));
  el.setAttribute("y", String(y));
  el.setAttribute("text-anchor", anchor);
  el.setAttribute("class", "chart-text");
  el.textContent = content;
  return el;
}

/**
 * One point per (component, label group) with the mean weight on the
 * y axis. Absent groups simply contribute no point.
 */
export function associationChart(table: AssociationPayload,
                                 width = 420, height = 260): SVGSVGElement {
  const svg = svgRoot(width, height, "association-chart");
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const maxWeight = table.rows.reduce((m, r) => Math.max(m, r.mean_weight), 0) || 1;
  const xOf = (component: number) =>
    MARGIN.left + ((component + 0.5) / table.k) * innerW;
  const yOf = (weight: number) =>
    MARGIN.top + innerH - (weight / maxWeight) * innerH;

  for (let c = 0; c < table.k; c++) {
    svg.appendChild(text(xOf(c), height - 8, `C${c}`));
  }
  svg.appendChild(text(12, MARGIN.top + 4, maxWeight.toExponential(1), "start"));

  for (const row of table.rows) {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(xOf(row.component)));
    dot.setAttribute("cy", String(yOf(row.mean_weight)));
    dot.setAttribute("r", "5");
    dot.setAttribute("fill", labelColor(row.label));
    dot.setAttribute("data-component", String(row.component));
    dot.setAttribute("data-label", row.label);
    dot.setAttribute("data-mean-weight", String(row.mean_weight));
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `C${row.component} x ${row.label}: ` +
      `${row.mean_weight.toPrecision(4)} over ${row.group_size} towers`;
    dot.appendChild(title);
    svg.appendChild(dot);
  }
  return svg;
}

/** Residual curve over k; NMF and the SVD optimum share the axes. */
export function rssCurveChart(points: RssPoint[], currentK: number | null,
                              width = 420, height = 220): SVGSVGElement {
  const svg = svgRoot(width, height, "rss-curve");
  const sorted = [...points].sort((a, b) => a.k - b.k);
  if (!sorted.length) {
    svg.appendChild(text(width / 2, height / 2, "no residual data yet"));
    return svg;
  }
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const ks = sorted.map((p) => p.k);
  const kLo = Math.min(...ks);
  const kHi = Math.max(...ks);
  const top = Math.max(...sorted.map((p) => Math.max(p.nmf_rss, p.svd_rss))) || 1;
  const xOf = (k: number) =>
    MARGIN.left + (kHi === kLo ? 0.5 : (k - kLo) / (kHi - kLo)) * innerW;
  const yOf = (v: number) => MARGIN.top + innerH - (v / top) * innerH;

  const series: ["nmf_rss" | "svd_rss", string][] = [
    ["nmf_rss", "#1f77b4"],
    ["svd_rss", "#999999"],
  ];
  for (const [field, color] of series) {
    const path = document.createElementNS(SVG_NS, "polyline");
    path.setAttribute("points",
      sorted.map((p) => `${xOf(p.k)},${yOf(p[field])}`).join(" "));
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", color);
    path.setAttribute("stroke-width", "1.5");
    path.setAttribute("data-series", field);
    svg.appendChild(path);
    for (const p of sorted) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(xOf(p.k)));
      dot.setAttribute("cy", String(yOf(p[field])));
      dot.setAttribute("r", p.k === currentK ? "5" : "3");
      dot.setAttribute("fill", color);
      dot.setAttribute("data-series", field);
      dot.setAttribute("data-k", String(p.k));
      svg.appendChild(dot);
    }
  }
  for (const p of sorted) {
    svg.appendChild(text(xOf(p.k), height - 8, String(p.k)));
  }
  svg.appendChild(text(12, MARGIN.top + 4, top.toPrecision(3), "start"));
  return svg;
}

/** Legend entry list for the component layers. */
export function componentLegend(
  k: number,
  names: Record<string, string>,
  onSelect: (c: number) => void,
): HTMLUListElement {
  const list = document.createElement("ul");
  list.className = "component-legend";
  for (let c = 0; c < k; c++) {
    const item = document.createElement("li");
    item.setAttribute("data-component", String(c));
    const swatch = document.createElement("span");
    swatch.className = "legend-swatch";
    swatch.style.backgroundColor = componentColor(c);
    const label = document.createElement("span");
    label.className = "legend-name";
    label.textContent = names[String(c)] ?? `C${c}`;
    item.append(swatch, label);
    item.addEventListener("click", () => onSelect(c));
    list.appendChild(item);
  }
  return list;
}
