/** Shapes of the review service's JSON payloads. */

export type Role = "query" | "source";

export type RunState = "pending" | "running" | "done" | "failed";

export type Verdict = "confirmed" | "rejected" | "undecided";

export interface DocumentSummary {
  doc_id: string;
  role: Role;
  segment_count: number;
  sha256?: string;
  warnings: string[];
}

export interface RunConfigInput {
  architecture: string;
  k: number;
  threshold: number;
  embedder: string;
  classifier: string;
  budget?: number;
  seed?: number;
}

export interface RunRecord {
  run_id: string;
  state: RunState;
  created_at: string;
  config: Record<string, unknown>;
  query_doc_id: string;
  source_doc_id: string;
  error: string | null;
}

export interface ResultItem {
  query_seg_id: string;
  source_seg_id: string;
  query_text: string;
  source_text: string;
  similarity: number | null;
  probability: number | null;
  label: "reference" | "no_reference";
  origin: string;
  shared_tokens: string[] | null;
  verdict: Verdict;
  reviewer: string | null;
  decided_at: string | null;
}

export interface ResultsPage {
  run_id: string;
  page: number;
  page_size: number;
  total: number;
  total_pages: number;
  items: ResultItem[];
}

export interface DecisionRecord {
  query_seg_id: string;
  source_seg_id: string;
  verdict: Verdict;
  reviewer: string;
  decided_at: string;
}

export interface ResultFilters {
  minProb?: number;
  label?: "reference" | "no_reference";
  querySegId?: string;
}
