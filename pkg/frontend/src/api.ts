/** Typed client for the run server's JSON API. */

export interface RunManifest {
  run_id: string;
  created_at: string;
  config: Record<string, unknown>;
  inputs: Record<string, string>;
  outputs: Record<string, string>;
}

export interface TowerRow {
  tower_id: string;
  name: string;
  lat: number;
  lon: number;
  indoor: boolean;
  underground_metro: boolean;
  labels: string[];
  display_label: string;
}

export interface InfraLine {
  kind: "highway" | "metro_surface";
  coordinates: [number, number][]; // [lon, lat]
}

export interface TowersPayload {
  towers: TowerRow[];
  infrastructure: InfraLine[];
}

export interface ComponentFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: { tower_id: string; weight: number; component: number };
}

export interface ComponentCollection {
  type: "FeatureCollection";
  component: number;
  degenerate: boolean;
  display_name?: string;
  features: ComponentFeature[];
}

export interface ComponentsPayload {
  k: number;
  names: Record<string, string>;
  components: ComponentCollection[];
}

export interface RssPoint {
  k: number;
  nmf_rss: number;
  svd_rss: number;
}

export interface AssociationRow {
  component: number;
  label: string;
  mean_weight: number;
  group_size: number;
}

export interface AssociationPayload {
  k: number;
  rows: AssociationRow[];
  group_sizes: Record<string, number>;
}

export interface HeatmapPayload {
  k: number;
  n: number;
  seed: number;
  values: number[][];
}

export interface JobRef {
  job_id: string;
  status: string;
}

export interface JobStatus {
  id: string;
  k: number;
  seed: number;
  restarts: number;
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(readonly baseUrl: string, fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? fetch.bind(globalThis);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  getRun(): Promise<RunManifest> {
    return this.request("/api/run");
  }

  getTowers(): Promise<TowersPayload> {
    return this.request("/api/towers");
  }

  getComponents(k: number): Promise<ComponentsPayload> {
    return this.request(`/api/components?k=${k}`);
  }

  getRssCurve(): Promise<{ points: RssPoint[] }> {
    return this.request("/api/rss-curve");
  }

  getAssociation(k: number): Promise<AssociationPayload> {
    return this.request(`/api/label-association?k=${k}`);
  }

  getHeatmap(k: number, n: number, seed: number): Promise<HeatmapPayload> {
    return this.request(`/api/heatmap?k=${k}&n=${n}&seed=${seed}`);
  }

  postFactorize(k: number, seed = 0, restarts = 1): Promise<JobRef> {
    return this.request("/api/factorize", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ k, seed, restarts }),
    });
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/api/jobs/${jobId}`);
  }

  putComponentName(k: number, component: number, name: string): Promise<unknown> {
    return this.request(`/api/components/${k}/${component}/name`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    });
  }
}
