import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError, ComponentsPayload } from "../src/api.js";
import { ExplorerApp } from "../src/app.js";
import { RefactorizeController } from "../src/jobs.js";
import { defaultState } from "../src/state.js";
import { associationPayload, componentsPayload, towersPayload } from "./fixtures.js";

const FAST_POLL = {
  initialIntervalMs: 1, backoffFactor: 1.2, maxIntervalMs: 4, timeoutMs: 2000,
};

class ServerStub {
  computed = new Map<number, ComponentsPayload>();
  names = new Map<string, string>();
  rejectNames = false;
  failJobs = false;
  private jobTicks = new Map<string, number>();
  private posts = 0;

  constructor(ks: number[]) {
    for (const k of ks) this.computed.set(k, componentsPayload(k));
  }

  async getTowers() { return towersPayload(); }

  async getComponents(k: number) {
    const payload = this.computed.get(k);
    if (!payload) throw new ApiError(404, `no factorization at k=${k}`);
    const names: Record<string, string> = {};
    for (const [key, name] of this.names) {
      const [kk, c] = key.split("/");
      if (Number(kk) === k) names[c!] = name;
    }
    return { ...payload, names };
  }

  async getRssCurve() {
    return {
      points: Array.from(this.computed.keys()).sort((a, b) => a - b)
        .map((k) => ({ k, nmf_rss: 100 / k, svd_rss: 99 / k })),
    };
  }

  async getAssociation(_k: number) { return associationPayload(); }

  async getHeatmap(k: number, n: number, seed: number) {
    return { k, n, seed, values: [[1, 0], [0.5, 0.5]] };
  }

  async postFactorize(k: number) {
    this.posts += 1;
    const id = `job-${this.posts}`;
    this.jobTicks.set(id, 2);
    if (!this.failJobs) this.computed.set(k, componentsPayload(k));
    return { job_id: id, status: "queued" };
  }

  async getJob(id: string) {
    const left = (this.jobTicks.get(id) ?? 0) - 1;
    this.jobTicks.set(id, left);
    const status = left > 0 ? "running" : this.failJobs ? "failed" : "done";
    return { id, k: 0, seed: 0, restarts: 1, status,
             error: status === "failed" ? "boom" : null };
  }

  async putComponentName(k: number, c: number, name: string) {
    if (this.rejectNames) throw new ApiError(400, "rejected");
    this.names.set(`${k}/${c}`, name);
    return { k, component: c, name };
  }

  asClient(): ApiClient { return this as unknown as ApiClient; }
}

function makeApp(stub: ServerStub, k: number) {
  const root = document.createElement("div");
  document.body.replaceChildren(root);
  const api = stub.asClient();
  return new ExplorerApp(root, api, defaultState(k), {
    jobs: new RefactorizeController(api, FAST_POLL),
  });
}

describe("explorer app", () => {
  let stub: ServerStub;

  beforeEach(() => {
    stub = new ServerStub([4]);
    history.replaceState(null, "", "?");
  });

  it("loads and renders the initial k", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    expect(app.map.componentLayers()).toHaveLength(4);
    expect(document.querySelectorAll(".component-legend li")).toHaveLength(4);
    expect(document.querySelector(".banner")!.textContent).toContain("4 components");
  });

  it("computes a missing k through the job queue and swaps layers", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    await app.setK(6);
    expect(app.state.k).toBe(6);
    expect(app.map.componentLayers()).toHaveLength(6);
    const rssDots = document.querySelectorAll(
      '.rss-panel circle[data-series="nmf_rss"]');
    expect(rssDots.length).toBe(2); // curve gained the new point
  });

  it("keeps previous layers when a job fails", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    stub.failJobs = true;
    await app.setK(6);
    expect(app.map.componentLayers()).toHaveLength(4);
    expect(app.state.k).toBe(4);
    const banner = document.querySelector(".banner")!;
    expect(banner.className).toContain("banner-error");
    expect(banner.textContent).toContain("boom");
  });

  it("clamps the requested k to the supported range", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    await app.setK(99); // clamps to 16, which the stub will compute
    expect(app.state.k).toBe(16);
  });

  it("names the selected component and updates the legend", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    app.select(2);
    await app.nameSelectedComponent("river corridor");
    const item = document.querySelector('.component-legend li[data-component="2"]');
    expect(item!.textContent).toContain("river corridor");
    expect(stub.names.get("4/2")).toBe("river corridor");
  });

  it("rejects empty names client-side", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    app.select(1);
    await app.nameSelectedComponent("   ");
    expect(stub.names.size).toBe(0);
    expect(document.querySelector(".banner")!.textContent)
      .toContain("must not be empty");
  });

  it("reverts when the server rejects a rename", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    stub.rejectNames = true;
    app.select(0);
    await app.nameSelectedComponent("nope");
    expect(document.querySelector(".banner")!.className).toContain("banner-error");
    const item = document.querySelector('.component-legend li[data-component="0"]');
    expect(item!.textContent).toContain("C0");
  });

  it("mirrors state into the URL", async () => {
    const app = makeApp(stub, 4);
    await app.init();
    app.select(3);
    expect(window.location.search).toContain("k=4");
    expect(window.location.search).toContain("c=3");
  });

  it("shows a banner when the server is unreachable", async () => {
    const broken = {
      getTowers: async () => { throw new Error("connection refused"); },
    } as unknown as ApiClient;
    const root = document.createElement("div");
    document.body.replaceChildren(root);
    const app = new ExplorerApp(root, broken, defaultState(4));
    await expect(app.init()).rejects.toThrow();
    expect(document.querySelector(".banner")!.textContent)
      .toContain("server unreachable");
  });
});
