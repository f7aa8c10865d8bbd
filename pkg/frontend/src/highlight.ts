/** Client-side shared-token highlighting for side-by-side text panes.
 *
 * Purely presentational: the match itself was computed server-side and
 * arrives as the `shared_tokens` field. Token comparison folds case and the
 * u/v and i/j spelling variation the engine normalizes, so "Vox" highlights
 * when the shared token list says "uox".
 */

export interface HighlightSpan {
  text: string;
  marked: boolean;
}

function foldToken(token: string): string {
  return token.toLowerCase().replace(/v/g, "u").replace(/j/g, "i");
}

/** Split into word / non-word runs, marking words in the shared set. */
export function highlightSpans(text: string, sharedTokens: string[] | null): HighlightSpan[] {
  if (!text) return [];
  const shared = new Set((sharedTokens ?? []).map(foldToken));
  const spans: HighlightSpan[] = [];
  const parts = text.split(/([^\p{L}\p{N}_]+)/u);
  for (const part of parts) {
    if (!part) continue;
    const isWord = /[\p{L}\p{N}_]/u.test(part);
    spans.push({ text: part, marked: isWord && shared.has(foldToken(part)) });
  }
  return spans;
}

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Render spans to HTML with <mark> around shared tokens. */
export function highlightHtml(text: string, sharedTokens: string[] | null): string {
  return highlightSpans(text, sharedTokens)
    .map((span) => (span.marked ? `<mark>${escapeHtml(span.text)}</mark>` : escapeHtml(span.text)))
    .join("");
}
