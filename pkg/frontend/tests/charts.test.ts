import { describe, expect, it } from "vitest";

import { associationChart, componentLegend, rssCurveChart } from "../src/charts.js";
import { heatColor } from "../src/heatmap.js";
import { associationPayload } from "./fixtures.js";

describe("association chart", () => {
  it("draws one point per present (component, label) pair", () => {
    const svg = associationChart(associationPayload());
    expect(svg.querySelectorAll("circle")).toHaveLength(6);
  });

  it("omits absent groups", () => {
    const table = associationPayload();
    table.rows = table.rows.filter(
      (r) => !(r.component === 1 && r.label === "none"));
    const svg = associationChart(table);
    expect(svg.querySelectorAll("circle")).toHaveLength(5);
  });

  it("passes mean weights through exactly", () => {
    const table = associationPayload();
    const svg = associationChart(table);
    const byKey = new Map<string, string>();
    svg.querySelectorAll("circle").forEach((dot) => {
      byKey.set(`${dot.getAttribute("data-component")}|${dot.getAttribute("data-label")}`,
                dot.getAttribute("data-mean-weight")!);
    });
    for (const row of table.rows) {
      expect(byKey.get(`${row.component}|${row.label}`))
        .toBe(String(row.mean_weight));
    }
  });
});

describe("rss curve chart", () => {
  it("renders both series sorted by k", () => {
    const svg = rssCurveChart([
      { k: 8, nmf_rss: 9.0, svd_rss: 8.5 },
      { k: 4, nmf_rss: 30.0, svd_rss: 29.5 },
    ], 8);
    const lines = svg.querySelectorAll("polyline");
    expect(lines).toHaveLength(2);
    const dots = svg.querySelectorAll('circle[data-series="nmf_rss"]');
    expect(Array.from(dots).map((d) => d.getAttribute("data-k"))).toEqual(["4", "8"]);
  });

  it("handles the empty curve", () => {
    const svg = rssCurveChart([], null);
    expect(svg.textContent).toContain("no residual data");
  });
});

describe("component legend", () => {
  it("shows expert names when present, defaults otherwise", () => {
    const picks: number[] = [];
    const legend = componentLegend(3, { "1": "south side" }, (c) => picks.push(c));
    const items = legend.querySelectorAll("li");
    expect(items).toHaveLength(3);
    expect(items[0]!.textContent).toContain("C0");
    expect(items[1]!.textContent).toContain("south side");
    (items[2] as HTMLElement).click();
    expect(picks).toEqual([2]);
  });
});

describe("heatmap colors", () => {
  it("darkens monotonically with the value", () => {
    const [r0] = heatColor(0);
    const [r1] = heatColor(0.5);
    const [r2] = heatColor(1);
    expect(r0).toBeGreaterThan(r1);
    expect(r1).toBeGreaterThan(r2);
    expect(heatColor(-1)).toEqual(heatColor(0));
    expect(heatColor(2)).toEqual(heatColor(1));
  });
});
