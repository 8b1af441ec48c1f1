/**
 * End-to-end parity against a live service: everything the console shows
 * must match what the CLI reports for the same library and queries.
 */
import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { Ajv } from "ajv";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError, ServiceUnreachable } from "../src/api.js";
import { makeCaseCard, ReviewQueue } from "../src/cards.js";
import { CalibrationPanel } from "../src/calibration.js";
import { RetrievalGallery } from "../src/gallery.js";
import { renderApiError, renderBanner, renderCaseCard } from "../src/render.js";
import { StatusModel } from "../src/status.js";
import type { DiagnosisResponse } from "../src/types.js";

const PORT = 8979;
const fixtureScript = fileURLToPath(new URL("./fixtures/make_demo.py", import.meta.url));
const schemaPath = fileURLToPath(
  new URL("../../src/refmatch/schemas/review_sheet.schema.json", import.meta.url),
);
// one backend for the service and every CLI call, so outputs match exactly
const env = { ...process.env, ENGINE_KERNEL: "numpy" };

interface DemoInfo {
  base_url: string;
  config: string;
  library: string;
  store: string;
  queries_jsonl: string;
  one_jsonl: string;
  scored_jsonl: string;
  parity_vectors: number[][];
  single_vector: number[];
  ambiguous_vector: number[];
}

let dir: string;
let info: DemoInfo;
let server: ChildProcess;
let serverLog = "";
let client: ApiClient;

function cli(args: string[]): unknown {
  return JSON.parse(execFileSync("refmatch", args, { env, encoding: "utf8" }));
}

function py(code: string, ...args: string[]): unknown {
  return JSON.parse(execFileSync("python3", ["-c", code, ...args], { env, encoding: "utf8" }));
}

function stripTiming<T extends { timing_ms?: number }>(payload: T): Omit<T, "timing_ms"> {
  const { timing_ms, ...rest } = payload;
  return rest;
}

beforeAll(async () => {
  dir = mkdtempSync(join(tmpdir(), "console-demo-"));
  execFileSync("python3", [fixtureScript, dir, String(PORT)], { env });
  info = JSON.parse(readFileSync(join(dir, "info.json"), "utf8"));
  client = new ApiClient(info.base_url);

  server = spawn("refmatch", ["serve", info.config], { env, stdio: ["ignore", "ignore", "pipe"] });
  server.stderr?.on("data", (chunk) => {
    serverLog += String(chunk);
  });

  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const resp = await fetch(`${info.base_url}/v1/health`);
      if (resp.ok) break;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up:\n${serverLog}`);
    }
    await new Promise((r) => setTimeout(r, 250));
  }
});

afterAll(() => {
  server?.kill();
  if (dir) rmSync(dir, { recursive: true, force: true });
});

describe("console parity with the CLI", () => {
  it("submitted demo vectors show the same Top-5 labels as the CLI", async () => {
    const cliRows = cli([
      "diagnose", info.library, info.queries_jsonl, "--config", info.config,
    ]) as DiagnosisResponse[];
    expect(cliRows).toHaveLength(3);

    for (let i = 0; i < info.parity_vectors.length; i++) {
      const resp = await client.diagnose({ vector: info.parity_vectors[i] });
      expect(stripTiming(resp)).toEqual(stripTiming(cliRows[i]));
      expect(resp.ranked_labels).toHaveLength(5);

      const card = makeCaseCard(`case-${i}`, resp);
      const html = renderCaseCard(card);
      // rendered rows appear in exactly the CLI's ranking order
      const rendered = [...html.matchAll(/<td>(disease_\d)<\/td>/g)].map((m) => m[1]);
      expect(rendered).toEqual(cliRows[i].ranked_labels.map((r) => r.label));
    }
  });

  it("confident submission shows the same cscore as the CLI", async () => {
    const cliResp = cli([
      "diagnose", info.library, info.one_jsonl, "--config", info.config,
      "--confident", "--theta", "0.4",
    ]) as DiagnosisResponse;
    const resp = await client.diagnoseConfident({ vector: info.single_vector, theta: 0.4 });
    expect(stripTiming(resp)).toEqual(stripTiming(cliResp));

    const html = renderCaseCard(makeCaseCard("case-x", resp));
    expect(html).toContain(`cscore ${cliResp.cscore!.toFixed(4)}`);
  });

  it("low-confidence case enters the review queue; confident one does not", async () => {
    const queryFile = join(dir, "ambiguous.jsonl");
    writeFileSync(queryFile, JSON.stringify({ vector: info.ambiguous_vector }) + "\n");
    const cliResp = cli([
      "diagnose", info.library, queryFile, "--config", info.config,
      "--confident", "--theta", "0.99",
    ]) as DiagnosisResponse;

    const flagged = await client.diagnoseConfident({ vector: info.ambiguous_vector, theta: 0.99 });
    expect(stripTiming(flagged)).toEqual(stripTiming(cliResp));
    expect(flagged.reliable).toBe(false);
    expect(flagged.cscore).toBe(0.85);

    const confident = await client.diagnoseConfident({ vector: info.single_vector, theta: 0.4 });
    expect(confident.reliable).toBe(true);

    const queue = new ReviewQueue();
    expect(queue.add(makeCaseCard("flagged", flagged))).toBe(true);
    expect(queue.add(makeCaseCard("confident", confident))).toBe(false);
    expect(queue.pending()).toHaveLength(1);

    const exit = queue.decide("flagged", "relabel", "disease_1");
    expect(exit.decision).toBe("relabel");
    expect(queue.size).toBe(0);
  });

  it("service errors carry machine code plus human message into the view", async () => {
    const err = await client.diagnose({ vector: [1, 2, 3] }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("DIM_MISMATCH");
    const html = renderApiError({ code: err.code, message: err.message, detail: err.detail });
    expect(html).toContain("<code>DIM_MISMATCH</code>");
    expect(html).toContain(err.message);
  });

  it("calibration panel displays the engine's theta* and applies it to the service", async () => {
    const cliResult = cli([
      "calibrate", info.library, info.scored_jsonl,
    ]) as { theta_star: number; positives: number; negatives: number; curve: unknown[] };

    const panel = new CalibrationPanel(client);
    const result = await panel.upload(readFileSync(info.scored_jsonl, "utf8"));

    expect(panel.thetaStar()).toBe(cliResult.theta_star);
    expect(result.positives).toBe(cliResult.positives);
    expect(result.negatives).toBe(cliResult.negatives);
    expect(result.curve).toEqual(cliResult.curve);

    const health = await client.health();
    expect(health.theta_star).toBe(cliResult.theta_star);
  });

  it("review sheet export validates and reproduces the hit rates through the engine", async () => {
    const gallery = new RetrievalGallery(["reader_a", "reader_b"]);
    for (let i = 0; i < info.parity_vectors.length; i++) {
      const resp = await client.retrieve({ vector: info.parity_vectors[i], k: 10 });
      expect(resp.hits).toHaveLength(10);
      gallery.add(`q${i}`, resp.hits);
    }
    gallery.setVerdict("q0", "reader_a", 0, true);
    gallery.setVerdict("q1", "reader_a", 4, true);
    gallery.setVerdict("q0", "reader_b", 2, true);
    gallery.setVerdict("q2", "reader_b", 9, true);

    const sheet = gallery.toReviewSheet();
    const validate = new Ajv().compile(JSON.parse(readFileSync(schemaPath, "utf8")));
    expect(validate(sheet)).toBe(true);

    const sheetPath = join(dir, "review_sheet.json");
    writeFileSync(sheetPath, JSON.stringify(sheet));
    const report = py(
      "import json, sys\n" +
        "from refmatch.retrieval import ReviewSheet, topk_hit_rate\n" +
        "sheet = ReviewSheet.from_json(json.load(open(sys.argv[1])))\n" +
        "print(json.dumps(topk_hit_rate(sheet, [1, 5, 10]).to_json()))",
      sheetPath,
    ) as { by_reviewer: Record<string, Record<string, number>>; average: Record<string, number> };

    // hand-computed from the verdicts set above
    expect(report.by_reviewer.reader_a["1"]).toBeCloseTo(1 / 3, 12);
    expect(report.by_reviewer.reader_a["5"]).toBeCloseTo(2 / 3, 12);
    expect(report.by_reviewer.reader_a["10"]).toBeCloseTo(2 / 3, 12);
    expect(report.by_reviewer.reader_b["1"]).toBeCloseTo(0, 12);
    expect(report.by_reviewer.reader_b["5"]).toBeCloseTo(1 / 3, 12);
    expect(report.by_reviewer.reader_b["10"]).toBeCloseTo(2 / 3, 12);
    expect(report.average["1"]).toBeCloseTo(1 / 6, 12);
    expect(report.average["5"]).toBeCloseTo(1 / 2, 12);
    expect(report.average["10"]).toBeCloseTo(2 / 3, 12);
  });

  it("unreachable service produces the offline banner, not a crash", async () => {
    const downClient = new ApiClient("http://127.0.0.1:1");
    const model = new StatusModel(downClient);
    const state = await model.refresh();
    expect(state.online).toBe(false);

    const banner = renderBanner(state);
    expect(banner).toContain("Service offline");

    const err = await downClient.diagnose({ vector: [0] }).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceUnreachable);
  });
});
