/** Typed client for the review service HTTP API. */

import type {
  DecisionRecord,
  DocumentSummary,
  ResultFilters,
  ResultsPage,
  Role,
  RunConfigInput,
  RunRecord,
  Verdict,
} from "./types.js";

/** Error body shape: machine-readable code plus human message. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "error";
  let message = resp.statusText;
  try {
    const body = (await resp.json()) as { code?: string; message?: string; detail?: unknown };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
    else if (body.detail) message = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body; keep statusText */
  }
  return new ApiError(resp.status, code, message);
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private async requestText(path: string): Promise<string> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) throw await parseError(resp);
    return resp.text();
  }

  uploadDocument(
    role: Role,
    content: string,
    options: { docId?: string; format?: string; author?: string } = {},
  ): Promise<DocumentSummary> {
    return this.request<DocumentSummary>("/documents", {
      method: "POST",
      body: JSON.stringify({
        role,
        content,
        format: options.format ?? "csv",
        doc_id: options.docId,
        author: options.author ?? "",
      }),
    });
  }

  submitRun(queryDocId: string, sourceDocId: string, config: RunConfigInput): Promise<RunRecord> {
    return this.request<RunRecord>("/runs", {
      method: "POST",
      body: JSON.stringify({
        query_doc_id: queryDocId,
        source_doc_id: sourceDocId,
        config,
      }),
    });
  }

  getRun(runId: string): Promise<RunRecord> {
    return this.request<RunRecord>(`/runs/${encodeURIComponent(runId)}`);
  }

  getResults(
    runId: string,
    page: number,
    pageSize: number,
    filters: ResultFilters = {},
  ): Promise<ResultsPage> {
    const params = new URLSearchParams({ page: String(page), page_size: String(pageSize) });
    if (filters.minProb !== undefined) params.set("min_prob", String(filters.minProb));
    if (filters.label !== undefined) params.set("label", filters.label);
    if (filters.querySegId !== undefined) params.set("query_seg_id", filters.querySegId);
    return this.request<ResultsPage>(`/runs/${encodeURIComponent(runId)}/results?${params}`);
  }

  putDecision(
    runId: string,
    querySegId: string,
    sourceSegId: string,
    verdict: Verdict,
    reviewer: string,
  ): Promise<DecisionRecord> {
    return this.request<DecisionRecord>(`/runs/${encodeURIComponent(runId)}/decisions`, {
      method: "PUT",
      body: JSON.stringify({
        query_seg_id: querySegId,
        source_seg_id: sourceSegId,
        verdict,
        reviewer,
      }),
    });
  }

  /** Confirmed links as CSV, byte-for-byte as the service produced them. */
  exportConfirmed(runId: string, format: "csv" | "jsonl" = "csv"): Promise<string> {
    return this.requestText(`/runs/${encodeURIComponent(runId)}/export?format=${format}`);
  }
}
