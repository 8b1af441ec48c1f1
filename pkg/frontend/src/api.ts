/** Typed client for the service's JSON API; the console's only data path. */

import type {
  ApiErrorBody,
  AugmentResponse,
  CalibrationResponse,
  DiagnoseRequest,
  DiagnosisResponse,
  HealthReport,
  MetricsReport,
  RetrieveResponse,
  ScoredPair,
} from "./types.js";

/** A structured error the service returned (4xx with an error body). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service could not be reached at all (offline banner case). */
export class ServiceUnreachable extends Error {
  constructor(readonly baseUrl: string, cause: unknown) {
    super(`service unreachable at ${baseUrl}`);
    this.name = "ServiceUnreachable";
    this.cause = cause;
  }
}

type FetchLike = typeof globalThis.fetch;

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? globalThis.fetch.bind(globalThis);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ServiceUnreachable(this.baseUrl, err);
    }
    const body = await resp.json();
    if (!resp.ok) {
      const err = body as ApiErrorBody;
      throw new ApiError(
        resp.status,
        err.code ?? "UNKNOWN",
        err.message ?? "service error",
        err.detail ?? {},
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  diagnose(req: DiagnoseRequest): Promise<DiagnosisResponse> {
    return this.post("/v1/diagnose", req);
  }

  diagnoseConfident(req: DiagnoseRequest): Promise<DiagnosisResponse> {
    return this.post("/v1/diagnose/confident", req);
  }

  retrieve(req: DiagnoseRequest & { k?: number }): Promise<RetrieveResponse> {
    return this.post("/v1/retrieve", req);
  }

  augment(manifestPath: string, siteId: string): Promise<AugmentResponse> {
    return this.post("/v1/libraries/augment", {
      manifest_path: manifestPath,
      site_id: siteId,
    });
  }

  calibrate(scored: ScoredPair[]): Promise<CalibrationResponse> {
    return this.post("/v1/calibrate", { scored });
  }

  health(): Promise<HealthReport> {
    return this.request("/v1/health");
  }

  metrics(): Promise<MetricsReport> {
    return this.request("/v1/metrics");
  }
}
