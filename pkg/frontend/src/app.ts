/** Explorer application: the expert's iterate-on-k loop over one run. */

import { ApiClient, ApiError, ComponentsPayload } from "./api.js";
import { associationChart, componentLegend, rssCurveChart } from "./charts.js";
import { drawHeatmap } from "./heatmap.js";
import { RefactorizeController } from "./jobs.js";
import { boundsOf, MapView } from "./layers.js";
import { clampK, defaultState, K_MAX, K_MIN, selectComponent, toQuery,
         ViewState, withK } from "./state.js";

export interface AppOptions {
  syncUrl?: boolean;
  jobs?: RefactorizeController;
}

export class ExplorerApp {
  state: ViewState;
  readonly map: MapView;
  private readonly jobs: RefactorizeController;
  private names: Record<string, string> = {};
  private readonly panels: {
    banner: HTMLElement;
    legend: HTMLElement;
    rss: HTMLElement;
    association: HTMLElement;
    heatmap: HTMLCanvasElement;
    kInput: HTMLInputElement;
    nameInput: HTMLInputElement;
    nameTarget: HTMLElement;
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    initialState?: ViewState,
    private readonly options: AppOptions = {},
  ) {
    this.state = initialState ?? defaultState();
    this.jobs = options.jobs ?? new RefactorizeController(api);
    this.panels = this.buildSkeleton();
    this.map = new MapView(this.mustFind(".map-panel"));
  }

  private mustFind<T extends HTMLElement = HTMLElement>(selector: string): T {
    const el = this.root.querySelector<T>(selector);
    if (!el) throw new Error(`missing panel ${selector}`);
    return el;
  }

  private buildSkeleton() {
    this.root.innerHTML = `
      <header class="toolbar">
        <h1>Mobilicity Explorer</h1>
        <label>components (k)
          <input class="k-input" type="number" min="${K_MIN}" max="${K_MAX}" step="1">
        </label>
        <button class="refactorize-btn" type="button">factorize</button>
        <label class="toggle"><input type="checkbox" class="show-labels"> tower labels</label>
        <label class="toggle"><input type="checkbox" class="show-infra" checked> infrastructure</label>
        <span class="banner" role="status"></span>
      </header>
      <main class="content">
        <section class="map-panel"></section>
        <aside class="side-panels">
          <section class="legend-panel">
            <h2>Components</h2>
            <div class="legend"></div>
            <form class="name-form">
              <span class="name-target">select a component</span>
              <input class="name-input" type="text" placeholder="expert name">
              <button class="name-save" type="submit">save name</button>
            </form>
          </section>
          <section class="rss-panel"><h2>Residual vs k</h2></section>
          <section class="association-panel"><h2>Label association</h2></section>
          <section class="heatmap-panel">
            <h2>User-component sample</h2>
            <canvas class="heatmap-canvas"></canvas>
          </section>
        </aside>
      </main>`;
    const panels = {
      banner: this.mustFind(".banner"),
      legend: this.mustFind(".legend"),
      rss: this.mustFind(".rss-panel"),
      association: this.mustFind(".association-panel"),
      heatmap: this.mustFind<HTMLCanvasElement>(".heatmap-canvas"),
      kInput: this.mustFind<HTMLInputElement>(".k-input"),
      nameInput: this.mustFind<HTMLInputElement>(".name-input"),
      nameTarget: this.mustFind(".name-target"),
    };
    panels.kInput.value = String(this.state.k);
    this.mustFind(".refactorize-btn").addEventListener("click", () => {
      void this.setK(Number(panels.kInput.value));
    });
    this.mustFind<HTMLInputElement>(".show-labels").addEventListener("change", (ev) => {
      this.state.layers.towerLabels = (ev.target as HTMLInputElement).checked;
      this.map.setLayerVisibility("tower-labels", this.state.layers.towerLabels);
      this.syncUrl();
    });
    this.mustFind<HTMLInputElement>(".show-infra").addEventListener("change", (ev) => {
      this.state.layers.infrastructure = (ev.target as HTMLInputElement).checked;
      this.map.setLayerVisibility("infrastructure", this.state.layers.infrastructure);
      this.syncUrl();
    });
    this.mustFind(".name-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.nameSelectedComponent(panels.nameInput.value);
    });
    return panels;
  }

  banner(text: string, kind: "info" | "error" | "ok" = "info"): void {
    this.panels.banner.textContent = text;
    this.panels.banner.className = `banner banner-${kind}`;
  }

  async init(): Promise<void> {
    try {
      const towers = await this.api.getTowers();
      this.map.setBounds(boundsOf(towers.towers));
      this.map.renderInfrastructure(towers.infrastructure);
      this.map.renderTowerLabels(towers.towers);
      this.map.setLayerVisibility("tower-labels", this.state.layers.towerLabels);
      this.map.setLayerVisibility("infrastructure", this.state.layers.infrastructure);
    } catch (err) {
      this.banner(`server unreachable: ${(err as Error).message}`, "error");
      throw err;
    }
    await this.refreshRssCurve();
    await this.loadK(this.state.k, { computeIfMissing: false });
  }

  /** Switch to k, computing it through the job queue when missing. */
  async setK(kRaw: number): Promise<void> {
    const k = clampK(kRaw);
    this.panels.kInput.value = String(k);
    await this.loadK(k, { computeIfMissing: true });
  }

  private async loadK(k: number, opts: { computeIfMissing: boolean }): Promise<void> {
    let payload: ComponentsPayload;
    try {
      payload = await this.api.getComponents(k);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404 && opts.computeIfMissing) {
        await this.requestRefactorize(k);
        return;
      }
      this.banner(`cannot load components at k=${k}: ${(err as Error).message}`,
                  "error");
      return;
    }
    this.applyComponents(payload);
    await this.refreshAnalysisPanels(k);
    this.banner(`showing ${payload.k} components`, "ok");
  }

  /** POST a factorize job, poll it, and swap layers only on success. */
  async requestRefactorize(k: number, seed = 0): Promise<void> {
    if (this.jobs.pendingK === k) {
      this.banner(`already factorizing k=${k}`, "info");
      await this.jobs.request(k, seed); // coalesced
      return;
    }
    this.banner(`factorizing k=${k}...`, "info");
    this.state.pendingJobId = "pending";
    try {
      const outcome = await this.jobs.request(k, seed);
      this.state.pendingJobId = null;
      if (outcome.kind === "failed") {
        this.banner(`factorization failed: ${outcome.error}`, "error");
        return; // previous layers stay up
      }
      const payload = await this.api.getComponents(k);
      this.applyComponents(payload);
      await this.refreshAnalysisPanels(k);
      await this.refreshRssCurve();
      this.banner(`showing ${payload.k} components`, "ok");
    } catch (err) {
      this.state.pendingJobId = null;
      this.banner(`factorization request failed: ${(err as Error).message}`, "error");
    }
  }

  private applyComponents(payload: ComponentsPayload): void {
    this.state = withK(this.state, payload.k);
    this.names = { ...payload.names };
    this.map.setComponentLayers(payload.components);
    this.map.highlightComponent(this.state.selectedComponent);
    this.renderLegend();
    this.panels.kInput.value = String(payload.k);
    this.syncUrl();
  }

  private renderLegend(): void {
    const legend = componentLegend(this.state.k, this.names,
                                   (c) => this.select(c));
    this.panels.legend.replaceChildren(legend);
  }

  select(c: number | null): void {
    this.state = selectComponent(this.state, c);
    this.map.highlightComponent(this.state.selectedComponent);
    this.panels.nameTarget.textContent =
      this.state.selectedComponent === null
        ? "select a component"
        : `component ${this.state.selectedComponent}`;
    if (this.state.selectedComponent !== null) {
      this.panels.nameInput.value =
        this.names[String(this.state.selectedComponent)] ?? "";
    }
    this.syncUrl();
  }

  /** Persist an expert-assigned display name for the selected component. */
  async nameSelectedComponent(text: string): Promise<void> {
    const c = this.state.selectedComponent;
    if (c === null) {
      this.banner("select a component before naming it", "error");
      return;
    }
    const name = text.trim();
    if (!name) {
      this.banner("component name must not be empty", "error");
      return;
    }
    const previous = this.names[String(c)];
    try {
      await this.api.putComponentName(this.state.k, c, name);
      this.names[String(c)] = name;
      this.renderLegend();
      this.banner(`component ${c} named "${name}"`, "ok");
    } catch (err) {
      this.panels.nameInput.value = previous ?? "";
      this.banner(`rename rejected: ${(err as Error).message}`, "error");
    }
  }

  private async refreshAnalysisPanels(k: number): Promise<void> {
    try {
      const assoc = await this.api.getAssociation(k);
      const chart = associationChart(assoc);
      this.replaceChart(this.panels.association, chart);
    } catch {
      this.replaceChart(this.panels.association, null);
    }
    try {
      const heat = await this.api.getHeatmap(k, this.state.heatmapN,
                                             this.state.heatmapSeed);
      drawHeatmap(this.panels.heatmap, heat.values);
    } catch {
      // heatmap is advisory; leave the canvas as-is
    }
  }

  async refreshRssCurve(): Promise<void> {
    try {
      const curve = await this.api.getRssCurve();
      this.replaceChart(this.panels.rss, rssCurveChart(curve.points, this.state.k));
    } catch {
      this.replaceChart(this.panels.rss, null);
    }
  }

  private replaceChart(panel: HTMLElement, chart: SVGSVGElement | null): void {
    panel.querySelectorAll("svg").forEach((el) => el.remove());
    if (chart) panel.appendChild(chart);
  }

  private syncUrl(): void {
    if (this.options.syncUrl === false) return;
    if (typeof history !== "undefined" && history.replaceState) {
      history.replaceState(null, "", `?${toQuery(this.state)}`);
    }
  }
}
