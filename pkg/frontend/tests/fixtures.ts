/** Deterministic CSV corpus fixtures with planted text reuse. */

const WORDS = [
  "unda", "petra", "ignis", "tellus", "caelum", "flumen", "silua", "mons",
  "umbra", "lumen", "nauis", "uentus", "stella", "ripa", "fons", "aether",
  "litus", "nemus", "saxum", "pontus", "aura", "arbor", "herba", "nimbus",
];

function word(i: number): string {
  return WORDS[i % WORDS.length]! + (i >= WORDS.length ? String(Math.floor(i / WORDS.length)) : "");
}

function sourceTokens(i: number): string[] {
  return [word(i * 3), word(i * 3 + 1), word(i * 3 + 2), word(i * 5 + 7), word(i * 7 + 11)];
}

export function sourceCsv(n: number): string {
  const lines = ["id,text"];
  for (let i = 0; i < n; i++) {
    lines.push(`src-s${i},"${sourceTokens(i).join(" ")}."`);
  }
  return lines.join("\n") + "\n";
}

/** Query segments 0..nLinks-1 reuse the tokens of source segment i, reordered. */
export function queryCsv(n: number, nLinks: number): string {
  const lines = ["id,text"];
  for (let i = 0; i < n; i++) {
    let tokens: string[];
    if (i < nLinks) {
      const reused = sourceTokens(i);
      tokens = [reused[2]!, reused[0]!, reused[4]!, reused[1]!, reused[3]!];
    } else {
      tokens = [word(i * 13 + 101), word(i * 17 + 103), word(i * 19 + 107), word(i * 23 + 109)];
    }
    lines.push(`qry-s${i},"${tokens.join(" ")}."`);
  }
  return lines.join("\n") + "\n";
}
