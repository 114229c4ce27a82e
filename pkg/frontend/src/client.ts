// Warehouse API client. The explorer talks to the backend exclusively through
// this interface; tests substitute an in-memory implementation.

import type {
  Catalog,
  ErrorBody,
  MembersPage,
  QueryRequest,
  QueryResponse,
} from "./api-types.js";

export interface ApiClient {
  catalog(): Promise<Catalog>;
  members(
    dimension: string,
    level: string,
    options?: { parent?: string; page?: number; pageSize?: number },
  ): Promise<MembersPage>;
  query(request: QueryRequest, signal?: AbortSignal): Promise<QueryResponse>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(body.error);
  }
}

export class HttpApiClient implements ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    const body = (await response.json()) as T | ErrorBody;
    if (!response.ok) {
      throw new ApiError(response.status, body as ErrorBody);
    }
    return body as T;
  }

  catalog(): Promise<Catalog> {
    return this.request<Catalog>("/catalog");
  }

  members(
    dimension: string,
    level: string,
    options: { parent?: string; page?: number; pageSize?: number } = {},
  ): Promise<MembersPage> {
    const params = new URLSearchParams({ level });
    if (options.parent !== undefined) params.set("parent", options.parent);
    if (options.page !== undefined) params.set("page", String(options.page));
    if (options.pageSize !== undefined) params.set("page_size", String(options.pageSize));
    return this.request<MembersPage>(
      `/dimensions/${encodeURIComponent(dimension)}/members?${params}`,
    );
  }

  query(request: QueryRequest, signal?: AbortSignal): Promise<QueryResponse> {
    return this.request<QueryResponse>("/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
      signal: signal ?? null,
    });
  }
}
