import type {
  DecisionAction,
  ErrorBody,
  ExportManifest,
  ItemDetail,
  ItemPage,
  ItemStatus,
  ItemSummary,
  TrajectoryBody,
  Violation,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Error raised for any failed request. `status` 0 means the backend was
 *  unreachable; otherwise it is the HTTP status and `code` the server's
 *  error code (`not_found`, `version_conflict`, `validation_failed`,
 *  `invalid_request`). */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly violations: Violation[];

  constructor(status: number, body: ErrorBody) {
    super(body.message);
    this.name = "ApiError";
    this.status = status;
    this.code = body.code;
    this.violations = body.violations ?? [];
  }
}

export interface ListQuery {
  status?: ItemStatus;
  page?: number;
  pageSize?: number;
}

function requireVersion(version: number): number {
  if (!Number.isInteger(version) || version < 1) {
    throw new Error(`refusing to write without a known item version (got ${version})`);
  }
  return version;
}

/** Thin client for the review service. The only configuration is the
 *  backend base URL; every write carries the caller's last known version
 *  so a concurrent edit surfaces as a conflict instead of a lost update. */
export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, {
        code: "unreachable",
        message: `backend unreachable: ${String(err)}`,
      });
    }
    if (!response.ok) {
      let body: ErrorBody;
      try {
        body = (await response.json()) as ErrorBody;
      } catch {
        body = { code: "http_error", message: `HTTP ${response.status}` };
      }
      throw new ApiError(response.status, body);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload: unknown, method = "POST"): Promise<T> {
    return this.request<T>(path, {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  listItems(query: ListQuery = {}): Promise<ItemPage> {
    const params: string[] = [];
    if (query.status !== undefined) params.push(`status=${encodeURIComponent(query.status)}`);
    if (query.page !== undefined) params.push(`page=${query.page}`);
    if (query.pageSize !== undefined) params.push(`page_size=${query.pageSize}`);
    const suffix = params.length > 0 ? `?${params.join("&")}` : "";
    return this.request<ItemPage>(`/items${suffix}`);
  }

  getItem(id: string): Promise<ItemDetail> {
    return this.request<ItemDetail>(`/items/${encodeURIComponent(id)}`);
  }

  /** Absolute URL for a relative asset path from a bundle. */
  assetUrl(relative: string): string {
    if (relative.startsWith("/")) return this.baseUrl + relative;
    return `${this.baseUrl}/${relative}`;
  }

  /** Fetch a PNG asset and read its pixel size from the IHDR chunk.
   *  Returns null when the asset is missing (404) so callers can render a
   *  placeholder instead of a broken image. */
  async probePng(relative: string): Promise<{ width: number; height: number } | null> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.assetUrl(relative));
    } catch (err) {
      throw new ApiError(0, {
        code: "unreachable",
        message: `backend unreachable: ${String(err)}`,
      });
    }
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new ApiError(response.status, {
        code: "http_error",
        message: `HTTP ${response.status} for ${relative}`,
      });
    }
    const bytes = new Uint8Array(await response.arrayBuffer());
    return pngSize(bytes);
  }


  async decide(
    id: string,
    action: DecisionAction,
    reviewer: string,
    expectedVersion: number,
  ): Promise<ItemSummary> {
    return this.post<ItemSummary>(`/items/${encodeURIComponent(id)}/decision`, {
      action,
      reviewer,
      expected_version: requireVersion(expectedVersion),
    });
  }

  async saveBody(
    id: string,
    trajectory: TrajectoryBody,
    reviewer: string,
    expectedVersion: number,
  ): Promise<ItemSummary> {
    return this.post<ItemSummary>(
      `/items/${encodeURIComponent(id)}/body`,
      {
        trajectory,
        reviewer,
        expected_version: requireVersion(expectedVersion),
      },
      "PUT",
    );
  }

  exportCurated(path: string): Promise<ExportManifest> {
    return this.post<ExportManifest>("/export", { path });
  }
}

const PNG_MAGIC = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

function pngSize(bytes: Uint8Array): { width: number; height: number } {
  if (bytes.length < 24 || PNG_MAGIC.some((byte, i) => bytes[i] !== byte)) {
    throw new Error("asset is not a PNG");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  return { width: view.getUint32(16), height: view.getUint32(20) };
}
