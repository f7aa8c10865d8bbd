/** Wizard store for the review flow: upload -> configure -> results.
 *
 * The store owns all UI state and talks to the service exclusively through
 * the ApiClient; it never computes a score or rewrites a server value, so
 * everything rendered is byte-equal to a service response field. Decisions
 * are applied optimistically and reconciled with the server's stored record.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  DocumentSummary,
  ResultFilters,
  ResultItem,
  ResultsPage,
  RunConfigInput,
  RunRecord,
  Verdict,
} from "./types.js";

export type Stage = "upload" | "configure" | "results";

export interface ViewState {
  stage: Stage;
  queryDoc: DocumentSummary | null;
  sourceDoc: DocumentSummary | null;
  run: RunRecord | null;
  results: ResultsPage | null;
  filters: ResultFilters;
  pageSize: number;
  fieldErrors: Record<string, string>;
  banner: string | null;
  busy: boolean;
}

export interface ConfigDraft {
  architecture: string;
  k: number;
  threshold: number;
  embedder: string;
  classifier: string;
  budget?: number;
  seed?: number;
}

export const DEFAULT_CONFIG: ConfigDraft = {
  architecture: "retrieve_rerank",
  k: 10,
  threshold: 0.5,
  embedder: "mock",
  classifier: "jaccard",
};

/** Field-level validation mirroring the service's config contract. */
export function validateConfig(draft: ConfigDraft): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!Number.isInteger(draft.k) || draft.k < 1) {
    errors.k = "retrieval depth k must be an integer >= 1";
  }
  if (!(draft.threshold >= 0 && draft.threshold <= 1)) {
    errors.threshold = "threshold must be in [0, 1]";
  }
  if (!draft.architecture) {
    errors.architecture = "choose an architecture";
  }
  if (draft.budget !== undefined && draft.budget < 2) {
    errors.budget = "token budget must be >= 2";
  }
  return errors;
}

type Listener = (state: ViewState) => void;

export class ReviewApp {
  readonly api: ApiClient;
  private listeners: Listener[] = [];
  private pollDelayMs: number;

  state: ViewState = {
    stage: "upload",
    queryDoc: null,
    sourceDoc: null,
    run: null,
    results: null,
    filters: {},
    pageSize: 25,
    fieldErrors: {},
    banner: null,
    busy: false,
  };

  constructor(api: ApiClient, options: { pollDelayMs?: number } = {}) {
    this.api = api;
    this.pollDelayMs = options.pollDelayMs ?? 500;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Results are reachable only once a run has finished. */
  setStage(stage: Stage): void {
    if (stage === "results" && this.state.run?.state !== "done") return;
    if (stage === "configure" && (!this.state.queryDoc || !this.state.sourceDoc)) return;
    this.emit({ stage });
  }

  // ---- stage 1: upload ----

  async uploadDocument(
    role: "query" | "source",
    content: string,
    docId?: string,
  ): Promise<DocumentSummary | null> {
    const errorKey = role === "query" ? "queryFile" : "sourceFile";
    this.emit({ busy: true, fieldErrors: { ...this.state.fieldErrors, [errorKey]: "" } });
    try {
      const summary = await this.api.uploadDocument(role, content, { docId });
      const patch: Partial<ViewState> =
        role === "query" ? { queryDoc: summary } : { sourceDoc: summary };
      const fieldErrors = { ...this.state.fieldErrors };
      delete fieldErrors[errorKey];
      this.emit({ ...patch, fieldErrors, busy: false, banner: null });
      return summary;
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.emit({
        fieldErrors: { ...this.state.fieldErrors, [errorKey]: message },
        busy: false,
      });
      return null;
    }
  }

  get readyToConfigure(): boolean {
    return this.state.queryDoc !== null && this.state.sourceDoc !== null;
  }

  // ---- stage 2: configure + progress ----

  async submitRun(draft: ConfigDraft): Promise<RunRecord | null> {
    const fieldErrors = validateConfig(draft);
    if (Object.keys(fieldErrors).length > 0) {
      this.emit({ fieldErrors });
      return null;
    }
    if (!this.state.queryDoc || !this.state.sourceDoc) {
      this.emit({ banner: "upload both documents first" });
      return null;
    }
    this.emit({ busy: true, fieldErrors: {}, banner: null });
    const config: RunConfigInput = {
      architecture: draft.architecture,
      k: draft.k,
      threshold: draft.threshold,
      embedder: draft.embedder,
      classifier: draft.classifier,
    };
    if (draft.budget !== undefined) config.budget = draft.budget;
    if (draft.seed !== undefined) config.seed = draft.seed;
    try {
      const run = await this.api.submitRun(
        this.state.queryDoc.doc_id,
        this.state.sourceDoc.doc_id,
        config,
      );
      this.emit({ run });
      return await this.pollRun(run.run_id);
    } catch (err) {
      if (err instanceof ApiError) {
        // map config complaints back onto the form, other errors to the banner
        const target = /\bk\b/.test(err.message)
          ? "k"
          : /threshold/.test(err.message)
            ? "threshold"
            : null;
        if (err.code === "configuration_error" && target) {
          this.emit({ fieldErrors: { [target]: err.message }, busy: false });
        } else {
          this.emit({ banner: err.message, busy: false });
        }
      } else {
        this.emit({ banner: String(err), busy: false });
      }
      return null;
    }
  }

  async pollRun(runId: string, deadlineMs = 120_000): Promise<RunRecord | null> {
    const start = Date.now();
    for (;;) {
      const run = await this.api.getRun(runId);
      this.emit({ run });
      if (run.state === "done") {
        this.emit({ stage: "results", busy: false });
        await this.loadResults(1);
        return run;
      }
      if (run.state === "failed") {
        this.emit({ banner: run.error ?? "run failed", busy: false });
        return run;
      }
      if (Date.now() - start > deadlineMs) {
        this.emit({ banner: "timed out waiting for the run", busy: false });
        return null;
      }
      await new Promise((resolve) => setTimeout(resolve, this.pollDelayMs));
    }
  }

  /** Re-attach to an existing run (page reload with ?run=<id>). */
  async resumeRun(runId: string): Promise<RunRecord | null> {
    const run = await this.api.getRun(runId);
    this.emit({ run });
    if (run.state === "done") {
      this.emit({ stage: "results" });
      await this.loadResults(1);
    } else if (run.state === "failed") {
      this.emit({ banner: run.error ?? "run failed" });
    } else {
      return this.pollRun(runId);
    }
    return run;
  }

  // ---- stage 3: results + review ----

  async loadResults(page?: number, filters?: ResultFilters): Promise<ResultsPage | null> {
    if (!this.state.run) return null;
    if (filters !== undefined) this.emit({ filters });
    const target = page ?? this.state.results?.page ?? 1;
    try {
      const results = await this.api.getResults(
        this.state.run.run_id,
        target,
        this.state.pageSize,
        this.state.filters,
      );
      this.emit({ results, banner: null });
      return results;
    } catch (err) {
      this.emit({ banner: err instanceof ApiError ? err.message : String(err) });
      return null;
    }
  }

  /** Optimistic verdict write, reconciled against the stored decision. */
  async decide(item: ResultItem, verdict: Verdict, reviewer: string): Promise<boolean> {
    if (!this.state.run || !this.state.results) return false;
    const apply = (v: Verdict, rev: string | null, at: string | null): ResultsPage => ({
      ...this.state.results!,
      items: this.state.results!.items.map((row) =>
        row.query_seg_id === item.query_seg_id && row.source_seg_id === item.source_seg_id
          ? { ...row, verdict: v, reviewer: rev, decided_at: at }
          : row,
      ),
    });
    const before = this.state.results;
    this.emit({ results: apply(verdict, reviewer, null) });
    try {
      const stored = await this.api.putDecision(
        this.state.run.run_id,
        item.query_seg_id,
        item.source_seg_id,
        verdict,
        reviewer,
      );
      this.emit({ results: apply(stored.verdict, stored.reviewer, stored.decided_at) });
      return true;
    } catch (err) {
      // roll back so a failed write leaves a retry affordance, not a lie
      this.emit({
        results: before,
        banner: err instanceof ApiError ? err.message : String(err),
      });
      return false;
    }
  }

  exportConfirmed(): Promise<string> {
    if (!this.state.run) return Promise.reject(new Error("no run selected"));
    return this.api.exportConfirmed(this.state.run.run_id, "csv");
  }
}
