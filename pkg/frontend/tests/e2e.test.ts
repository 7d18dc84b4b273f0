/**
 * End-to-end: a scripted participant completes 11 trials against a live
 * service, the finalize tally matches the server, the dashboard's curve
 * points byte-match export.csv, and no active-session payload carries any
 * truth field.
 *
 * The test spawns `python3 -m rdlab.cli serve --demo` from the sibling
 * package; install it first (pip install -e ..).
 */

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, RdlabClient } from "../src/api.js";
import { buildDashboard, curvesMatchCsv } from "../src/dashboard.js";
import { resumeParticipant, runParticipant } from "../src/participant.js";

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;
const TRUTH_FIELDS = new Set(["d_multiple", "dgp_id", "seed", "truth", "answer", "graph_id"]);

let server: ChildProcess;
let studyId = "";

function assertNoTruth(payload: unknown, path = ""): void {
  if (Array.isArray(payload)) {
    payload.forEach((v, i) => assertNoTruth(v, `${path}[${i}]`));
  } else if (payload && typeof payload === "object") {
    for (const [key, val] of Object.entries(payload)) {
      if (TRUTH_FIELDS.has(key)) throw new Error(`truth field ${path}.${key}`);
      assertNoTruth(val, `${path}.${key}`);
    }
  }
}

async function waitForServer(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/studies/${studyId}/aggregate`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 300));
  }
  throw new Error("service did not come up in time");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-m", "rdlab.cli", "serve", "--demo",
      "--demo-participants", "4",
      "--master-seed", "2718",
      "--port", String(PORT),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  studyId = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error("no study id printed")), 90_000);
    server.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const line = buffer.split("\n").find((l) => l.includes("study_id"));
      if (line) {
        clearTimeout(timer);
        resolve(JSON.parse(line).study_id as string);
      }
    });
    server.on("exit", (code) => reject(new Error(`server exited early (${code})`)));
  });
  await waitForServer(60_000);
}, 120_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("participant end-to-end", () => {
  it("completes 11 trials; tally and earnings match the server", async () => {
    const client = new RdlabClient(BASE);
    const seen: unknown[] = [];
    const done = await runParticipant(
      client,
      studyId,
      (payload, k) => {
        seen.push(payload);
        expect(payload.trial_index).toBe(k);
        expect(payload.svg).toContain("<svg");
        return { reported: k % 2 === 0, bonus: "fixed" };
      },
      { "age range": "30-39" },
    );
    expect(done.trialsSeen).toBe(11);
    expect(done.state.stage).toBe("done");
    // all-fixed bonuses pin the earnings regardless of correctness
    expect(done.summary.earnings_cents).toBe(300 + 11 * 20);
    expect(done.summary.n_correct).toBeGreaterThanOrEqual(0);
    expect(done.summary.n_correct).toBeLessThanOrEqual(11);
    // a second finalize returns the same summary (idempotent)
    const again = await client.finalize(done.sessionId);
    expect(again).toEqual(done.summary);
    for (const payload of seen) assertNoTruth(payload);
  }, 60_000);

  it("never exposes truth fields in any active-session payload", async () => {
    const client = new RdlabClient(BASE);
    const info = await client.openSession(studyId);
    assertNoTruth(info);
    const state = await client.sessionState(info.session_id);
    assertNoTruth(state);
    const trial = await client.getTrial(info.session_id, 0);
    assertNoTruth(trial);
    expect(trial.svg).not.toMatch(/d_multiple|dgp|answer/);
    const ack = await client.submitResponse(info.session_id, 0, {
      reported: true,
      bonus: "wager",
      magnitude: null,
    });
    assertNoTruth(ack);
  }, 60_000);

  it("resumes a dropped session at the first unanswered trial", async () => {
    const client = new RdlabClient(BASE);
    const info = await client.openSession(studyId);
    // answer four trials, then "disconnect"
    for (let k = 0; k < 4; k++) {
      await client.getTrial(info.session_id, k);
      await client.submitResponse(info.session_id, k, {
        reported: false,
        bonus: "wager",
        magnitude: null,
      });
    }
    // retrying the last submit is idempotent
    const dup = await client.submitResponse(info.session_id, 3, {
      reported: false,
      bonus: "wager",
      magnitude: null,
    });
    expect(dup.answered).toBe(4);
    const done = await resumeParticipant(client, info.session_id, () => ({
      reported: true,
      bonus: "wager",
    }));
    expect(done.trialsSeen).toBe(7);
    expect(done.summary.earnings_cents).toBeGreaterThanOrEqual(300);
  }, 60_000);

  it("rejects out-of-order submissions", async () => {
    const client = new RdlabClient(BASE);
    const info = await client.openSession(studyId);
    await client.getTrial(info.session_id, 0);
    await expect(
      client.submitResponse(info.session_id, 5, {
        reported: true,
        bonus: "fixed",
        magnitude: null,
      }),
    ).rejects.toThrowError(ApiError);
  }, 60_000);
});

describe("admin dashboard end-to-end", () => {
  it("curve points byte-match the CSV export", async () => {
    const client = new RdlabClient(BASE);
    const view = buildDashboard(await client.aggregate(studyId));
    expect(view.curves.length).toBeGreaterThan(0);
    const csv = await client.exportCsv(studyId);
    expect(curvesMatchCsv(view, csv)).toBe(true);
  }, 60_000);

  it("lineup answer comes from the sidecar endpoint, not the SVG", async () => {
    const client = new RdlabClient(BASE);
    const { svg } = await client.lineup(studyId, 7);
    expect(svg).toContain("lineup-panel");
    expect(svg.toLowerCase()).not.toContain("answer");
    const ans = await client.lineupAnswer(studyId, 7);
    expect(ans.row).toBeGreaterThanOrEqual(1);
    expect(ans.row).toBeLessThanOrEqual(4);
    expect(ans.col).toBeGreaterThanOrEqual(1);
    expect(ans.col).toBeLessThanOrEqual(5);
  }, 60_000);
});
