/** Browser wiring: renders the wizard store into #app and binds events. */

import { ApiClient } from "./api.js";
import { highlightHtml, escapeHtml } from "./highlight.js";
import { DEFAULT_CONFIG, ReviewApp, type Stage, type ViewState } from "./state.js";
import type { ResultItem } from "./types.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8000";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmtScore(value: number | null): string {
  return value === null ? "–" : String(value);
}

function stageBadge(state: ViewState): string {
  const steps: Array<[Stage, string]> = [
    ["upload", "1 · Upload"],
    ["configure", "2 · Configure"],
    ["results", "3 · Review"],
  ];
  return steps
    .map(
      ([stage, label]) =>
        `<span class="step ${state.stage === stage ? "active" : ""}" data-stage="${stage}">${label}</span>`,
    )
    .join("");
}

function uploadCard(title: string, summary: ViewState["queryDoc"], error: string | undefined, inputId: string): string {
  const body = summary
    ? `<p class="ok">${escapeHtml(summary.doc_id)} · ${summary.segment_count} segments</p>` +
      summary.warnings.map((w) => `<p class="warn">${escapeHtml(w)}</p>`).join("")
    : `<p class="muted">CSV with id,text columns</p>`;
  const err = error ? `<p class="error">${escapeHtml(error)}</p>` : "";
  return `<div class="card">
    <h3>${title}</h3>
    <input type="file" id="${inputId}" accept=".csv,.jsonl" />
    ${body}${err}
  </div>`;
}

function renderUpload(state: ViewState): string {
  return `<div class="cards">
      ${uploadCard("Query document (later text)", state.queryDoc, state.fieldErrors.queryFile, "query-file")}
      ${uploadCard("Source document (earlier text)", state.sourceDoc, state.fieldErrors.sourceFile, "source-file")}
    </div>
    <button id="to-configure" ${state.queryDoc && state.sourceDoc ? "" : "disabled"}>Continue</button>`;
}

function field(label: string, input: string, error: string | undefined): string {
  return `<label class="field">${label}${input}${
    error ? `<span class="error">${escapeHtml(error)}</span>` : ""
  }</label>`;
}

function renderConfigure(state: ViewState): string {
  const e = state.fieldErrors;
  const running = state.run && (state.run.state === "pending" || state.run.state === "running");
  return `<form id="config-form" class="card">
      ${field(
        "Architecture",
        `<select name="architecture">
          <option value="retrieve_rerank">retrieve + rerank</option>
          <option value="retrieval_only">retrieval only</option>
          <option value="classification_only">classification only</option>
          <option value="ngram">n-gram matcher</option>
        </select>`,
        e.architecture,
      )}
      ${field("Retrieval depth k", `<input name="k" type="number" value="${DEFAULT_CONFIG.k}" />`, e.k)}
      ${field(
        "Classification threshold",
        `<input name="threshold" type="number" step="0.01" value="${DEFAULT_CONFIG.threshold}" />`,
        e.threshold,
      )}
      ${field("Embedding provider", `<input name="embedder" value="${DEFAULT_CONFIG.embedder}" />`, undefined)}
      ${field("Classifier provider", `<input name="classifier" value="${DEFAULT_CONFIG.classifier}" />`, undefined)}
      <button type="submit" ${running ? "disabled" : ""}>Run detection</button>
      ${running ? `<p class="muted">run ${escapeHtml(state.run!.run_id)} is ${state.run!.state}…</p>` : ""}
    </form>`;
}

function verdictButtons(item: ResultItem): string {
  const active = (v: string) => (item.verdict === v ? "active" : "");
  return `<div class="verdicts" data-q="${escapeHtml(item.query_seg_id)}" data-s="${escapeHtml(item.source_seg_id)}">
      <button class="confirm ${active("confirmed")}" data-verdict="confirmed">✓</button>
      <button class="reject ${active("rejected")}" data-verdict="rejected">✗</button>
    </div>`;
}

function renderResults(state: ViewState): string {
  if (!state.results) return `<p class="muted">loading results…</p>`;
  const rows = state.results.items
    .map(
      (item) => `<tr class="${item.verdict}">
        <td class="text">${highlightHtml(item.query_text, item.shared_tokens)}
          <span class="segid">${escapeHtml(item.query_seg_id)}</span></td>
        <td class="text">${highlightHtml(item.source_text, item.shared_tokens)}
          <span class="segid">${escapeHtml(item.source_seg_id)}</span></td>
        <td>${fmtScore(item.similarity)}</td>
        <td>${fmtScore(item.probability)}</td>
        <td>${item.label === "reference" ? "reference" : "–"}</td>
        <td>${verdictButtons(item)}</td>
      </tr>`,
    )
    .join("");
  const { page, total_pages, total } = state.results;
  return `<div class="toolbar">
      <label>min prob <input id="filter-minprob" type="number" step="0.05" min="0" max="1"
        value="${state.filters.minProb ?? ""}" /></label>
      <label>label <select id="filter-label">
        <option value="" ${state.filters.label ? "" : "selected"}>all</option>
        <option value="reference" ${state.filters.label === "reference" ? "selected" : ""}>reference</option>
        <option value="no_reference" ${state.filters.label === "no_reference" ? "selected" : ""}>no reference</option>
      </select></label>
      <span class="muted">${total} pairs</span>
      <button id="export-csv">Export confirmed CSV</button>
    </div>
    <table class="results">
      <thead><tr><th>query</th><th>source</th><th>sim</th><th>prob</th><th>label</th><th>verdict</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <div class="pager">
      <button id="prev-page" ${page <= 1 ? "disabled" : ""}>‹</button>
      <span>page ${page} / ${Math.max(total_pages, 1)}</span>
      <button id="next-page" ${page >= total_pages ? "disabled" : ""}>›</button>
    </div>`;
}

function render(app: ReviewApp, state: ViewState): void {
  el("steps").innerHTML = stageBadge(state);
  el("banner").innerHTML = state.banner
    ? `<div class="banner error">${escapeHtml(state.banner)}</div>`
    : "";
  const root = el("app");
  if (state.stage === "upload") root.innerHTML = renderUpload(state);
  else if (state.stage === "configure") root.innerHTML = renderConfigure(state);
  else root.innerHTML = renderResults(state);
  bind(app, state);
}

function bind(app: ReviewApp, state: ViewState): void {
  for (const [inputId, role] of [
    ["query-file", "query"],
    ["source-file", "source"],
  ] as const) {
    const input = document.getElementById(inputId) as HTMLInputElement | null;
    input?.addEventListener("change", async () => {
      const file = input.files?.[0];
      if (!file) return;
      await app.uploadDocument(role, await file.text(), file.name.replace(/\.\w+$/, ""));
    });
  }
  document.getElementById("to-configure")?.addEventListener("click", () => app.setStage("configure"));

  const form = document.getElementById("config-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    void app.submitRun({
      ...DEFAULT_CONFIG,
      architecture: String(data.get("architecture")),
      k: Number(data.get("k")),
      threshold: Number(data.get("threshold")),
      embedder: String(data.get("embedder")),
      classifier: String(data.get("classifier")),
    });
  });

  document.getElementById("filter-minprob")?.addEventListener("change", (event) => {
    const raw = (event.target as HTMLInputElement).value;
    void app.loadResults(1, { ...app.state.filters, minProb: raw === "" ? undefined : Number(raw) });
  });
  document.getElementById("filter-label")?.addEventListener("change", (event) => {
    const raw = (event.target as HTMLSelectElement).value;
    void app.loadResults(1, {
      ...app.state.filters,
      label: raw === "" ? undefined : (raw as "reference" | "no_reference"),
    });
  });
  document.getElementById("prev-page")?.addEventListener("click", () => {
    void app.loadResults((app.state.results?.page ?? 2) - 1);
  });
  document.getElementById("next-page")?.addEventListener("click", () => {
    void app.loadResults((app.state.results?.page ?? 0) + 1);
  });
  document.getElementById("export-csv")?.addEventListener("click", async () => {
    const csv = await app.exportConfirmed();
    const blob = new Blob([csv], { type: "text/csv" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "confirmed-links.csv";
    link.click();
    URL.revokeObjectURL(link.href);
  });

  for (const node of document.querySelectorAll<HTMLButtonElement>(".verdicts button")) {
    node.addEventListener("click", () => {
      const wrap = node.parentElement!;
      const q = wrap.dataset.q!;
      const s = wrap.dataset.s!;
      const item = state.results?.items.find(
        (row) => row.query_seg_id === q && row.source_seg_id === s,
      );
      if (!item) return;
      const verdict = node.dataset.verdict as "confirmed" | "rejected";
      const reviewer =
        (document.getElementById("reviewer") as HTMLInputElement | null)?.value ?? "";
      void app.decide(item, item.verdict === verdict ? "undecided" : verdict, reviewer);
    });
  }
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? DEFAULT_SERVICE;
  const app = new ReviewApp(new ApiClient(base));
  app.subscribe((state) => render(app, state));
  const resume = params.get("run");
  if (resume) void app.resumeRun(resume);
  render(app, app.state);
}

boot();
