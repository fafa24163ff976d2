import type {
  ApiErrorBody,
  CampaignConfig,
  CampaignDoc,
  CriterionPoint,
  PredictionPoint,
  Proposal,
  SubmitObservationRequest,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

/** Serialize a grid as the service expects: points joined by ';', coordinates by ','. */
export function gridParam(grid: number[][]): string {
  return grid.map((pt) => pt.join(",")).join(";");
}

/** Equispaced rendering grid: 200 points for 1-D, 40x40 for 2-D heatmaps. */
export function renderGrid(p: number): number[][] {
  if (p === 1) {
    const n = 200;
    return Array.from({ length: n }, (_, i) => [i / (n - 1)]);
  }
  if (p === 2) {
    const n = 40;
    const grid: number[][] = [];
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        grid.push([i / (n - 1), j / (n - 1)]);
      }
    }
    return grid;
  }
  throw new Error(`rendering supports p <= 2, got ${p}`);
}

/**
 * One-dimensional conditional slice for p > 2: vary one coordinate over
 * [0, 1], hold the others at the given values.
 */
export function sliceGrid(
  p: number,
  axis: number,
  fixed: number[],
  n = 200,
): number[][] {
  if (axis < 0 || axis >= p) {
    throw new Error(`axis ${axis} out of range for p=${p}`);
  }
  if (fixed.length !== p) {
    throw new Error(`fixed values must have length ${p}`);
  }
  return Array.from({ length: n }, (_, i) => {
    const pt = fixed.slice();
    pt[axis] = i / (n - 1);
    return pt;
  });
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const text = await resp.text();
    const body = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      throw new ServiceError(resp.status, body as ApiErrorBody);
    }
    return body as T;
  }

  createCampaign(
    config: CampaignConfig,
    initialObservations?: SubmitObservationRequest[],
  ): Promise<CampaignDoc> {
    return this.request("/api/campaigns", {
      method: "POST",
      body: JSON.stringify({
        config,
        initial_observations: initialObservations,
      }),
    });
  }

  getCampaign(id: string): Promise<CampaignDoc> {
    return this.request(`/api/campaigns/${id}`);
  }

  submitObservation(
    id: string,
    obs: SubmitObservationRequest,
  ): Promise<CampaignDoc & { normalized?: boolean }> {
    return this.request(`/api/campaigns/${id}/observations`, {
      method: "POST",
      body: JSON.stringify(obs),
    });
  }

  getProposal(id: string): Promise<Proposal> {
    return this.request(`/api/campaigns/${id}/proposal`);
  }

  getPredictions(id: string, grid: number[][]): Promise<PredictionPoint[]> {
    const q = encodeURIComponent(gridParam(grid));
    return this.request(`/api/campaigns/${id}/predictions?grid=${q}`);
  }

  getCriterion(id: string, grid: number[][]): Promise<CriterionPoint[]> {
    const q = encodeURIComponent(gridParam(grid));
    return this.request(`/api/campaigns/${id}/criterion?grid=${q}`);
  }
}

export interface QueuedSubmission {
  campaignId: string;
  request: SubmitObservationRequest;
}

/**
 * Holds observation submissions made while the service is unreachable and
 * replays them in order once a call succeeds again.
 */
export class OfflineQueue {
  private queue: QueuedSubmission[] = [];

  get length(): number {
    return this.queue.length;
  }

  pending(): readonly QueuedSubmission[] {
    return this.queue;
  }

  async submit(
    client: ApiClient,
    campaignId: string,
    request: SubmitObservationRequest,
  ): Promise<{ ok: boolean; queued: boolean }> {
    try {
      await client.submitObservation(campaignId, request);
      return { ok: true, queued: false };
    } catch (err) {
      if (err instanceof ServiceError) {
        throw err; // the service answered; a validation error is not "offline"
      }
      this.queue.push({ campaignId, request });
      return { ok: false, queued: true };
    }
  }

  async replay(client: ApiClient): Promise<number> {
    let replayed = 0;
    while (this.queue.length > 0) {
      const item = this.queue[0]!;
      try {
        await client.submitObservation(item.campaignId, item.request);
      } catch (err) {
        if (err instanceof ServiceError && err.status === 409) {
          // already accepted earlier (duplicate seq token): drop it
          this.queue.shift();
          replayed += 1;
          continue;
        }
        if (err instanceof ServiceError) {
          this.queue.shift();
          throw err;
        }
        break; // still offline
      }
      this.queue.shift();
      replayed += 1;
    }
    return replayed;
  }
}
