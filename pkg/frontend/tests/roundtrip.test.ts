/** Acceptance: full review round-trip through the UI store against the
 * live service — upload, configure (k=5, threshold 0.5), confirm two
 * matches, export, reload.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { DEFAULT_CONFIG, ReviewApp } from "../src/state.js";
import { queryCsv, sourceCsv } from "./fixtures.js";
import { startService, type RunningService } from "./service.js";

let service: RunningService;

beforeAll(async () => {
  service = await startService(8972);
});

afterAll(async () => {
  await service.stop();
});

describe("review round-trip", () => {
  it("upload -> configure -> confirm 2 -> export matches the service export byte for byte", async () => {
    const app = new ReviewApp(new ApiClient(service.url), { pollDelayMs: 50 });

    // stage 1: upload
    const qSummary = await app.uploadDocument("query", queryCsv(12, 4), "rt-query");
    const sSummary = await app.uploadDocument("source", sourceCsv(10), "rt-source");
    expect(qSummary?.segment_count).toBe(12);
    expect(sSummary?.segment_count).toBe(10);
    app.setStage("configure");
    expect(app.state.stage).toBe("configure");

    // stage 2: configure and run (k=5, threshold 0.5)
    const run = await app.submitRun({ ...DEFAULT_CONFIG, k: 5, threshold: 0.5, seed: 1 });
    expect(run?.state).toBe("done");
    expect(app.state.stage).toBe("results");
    const runId = app.state.run!.run_id;

    // stage 3: confirm two distinct matches
    const items = app.state.results!.items;
    expect(items.length).toBeGreaterThanOrEqual(2);
    const chosen = [items[0]!, items[1]!];
    for (const item of chosen) {
      expect(await app.decide(item, "confirmed", "acceptance")).toBe(true);
    }

    // export through the UI path and compare with the raw service export
    const uiExport = await app.exportConfirmed();
    const directExport = await (
      await fetch(`${service.url}/runs/${runId}/export?format=csv`)
    ).text();
    expect(uiExport).toBe(directExport);

    const lines = uiExport.trim().split("\n");
    expect(lines[0]).toBe("query_seg_id,source_seg_id,category,provenance");
    expect(lines.length).toBe(3); // header + 2 confirmed rows
    for (const item of chosen) {
      expect(
        lines.some((line) => line.startsWith(`${item.query_seg_id},${item.source_seg_id},`)),
      ).toBe(true);
    }

    // page reload: a fresh store resuming the run still sees both verdicts
    const reloaded = new ReviewApp(new ApiClient(service.url), { pollDelayMs: 50 });
    await reloaded.resumeRun(runId);
    expect(reloaded.state.stage).toBe("results");
    for (const item of chosen) {
      const row = reloaded.state.results!.items.find(
        (r) => r.query_seg_id === item.query_seg_id && r.source_seg_id === item.source_seg_id,
      );
      expect(row?.verdict).toBe("confirmed");
    }

    console.log("[ACCEPTANCE-SECONDARY] UI round-trip: PASS");
  });
});
