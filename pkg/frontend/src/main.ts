/**
 * Browser entry point.  Query parameters pick the mode:
 *   ?study=<id>             participant flow
 *   ?study=<id>&admin=1     live dashboard (polls the aggregate endpoint)
 * The service origin defaults to the page origin and can be overridden
 * with ?api=<url>.
 */

import { RdlabClient, type TrialPayload } from "./api.js";
import { buildDashboard } from "./dashboard.js";
import {
  advancePractice,
  afterAck,
  afterFinalize,
  initialState,
  magnitudeRequired,
  validateChoice,
  type Choice,
  type FlowState,
} from "./flow.js";
import { PRACTICE_TASKS, practiceFeedback } from "./practice.js";
import {
  renderDashboard,
  renderPractice,
  renderResults,
  renderSurvey,
  renderTrial,
} from "./views.js";

const SURVEY_FIELDS = ["age range", "education", "prior statistics experience"];

function one<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const el = root.querySelector<T>(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el;
}

async function participantMode(root: HTMLElement, client: RdlabClient, studyId: string) {
  const info = await client.openSession(studyId);
  let state: FlowState = initialState(
    info.n_trials,
    info.magnitude_elicitation,
    PRACTICE_TASKS.length,
  );
  const sessionId = info.session_id;

  const step = async (): Promise<void> => {
    if (state.stage === "practice") {
      renderPractice(root, state);
      const task = PRACTICE_TASKS[state.practiceIndex]!;
      const nextBtn = one<HTMLButtonElement>(root, "#practice-next");
      const answer = (reported: boolean) => {
        one(root, "#practice-feedback").textContent = practiceFeedback(task, reported);
        nextBtn.disabled = false;
      };
      one(root, "#practice-yes").addEventListener("click", () => answer(true));
      one(root, "#practice-no").addEventListener("click", () => answer(false));
      nextBtn.addEventListener("click", () => {
        state = advancePractice(state);
        void step();
      });
      return;
    }
    if (state.stage === "trial") {
      const payload: TrialPayload = await client.getTrial(sessionId, state.trialIndex);
      renderTrial(root, state, payload);
      one(root, "#submit-trial").addEventListener("click", async () => {
        const reported =
          root.querySelector<HTMLInputElement>('input[name="reported"]:checked')?.value ===
          "yes";
        const bonus = root.querySelector<HTMLInputElement>(
          'input[name="bonus"]:checked',
        )?.value;
        if (bonus !== "wager" && bonus !== "fixed") return;
        const magnitudeEl = root.querySelector<HTMLInputElement>("#magnitude");
        const choice: Choice = {
          reported,
          bonus,
          magnitude:
            magnitudeRequired(state, reported) && magnitudeEl?.value
              ? Number(magnitudeEl.value)
              : null,
        };
        if (validateChoice(state, choice)) return; // incomplete form
        const ack = await client.submitResponse(sessionId, state.trialIndex, {
          reported: choice.reported,
          bonus: choice.bonus,
          magnitude: choice.magnitude ?? null,
        });
        state = afterAck(state, ack.answered);
        void step();
      });
      return;
    }
    if (state.stage === "survey") {
      renderSurvey(root, SURVEY_FIELDS);
      one(root, "#finish").addEventListener("click", async () => {
        const fields: Record<string, string> = {};
        root.querySelectorAll<HTMLInputElement>("[data-survey-field]").forEach((input) => {
          fields[input.dataset.surveyField!] = input.value;
        });
        await client.submitSurvey(sessionId, fields);
        const summary = await client.finalize(sessionId);
        state = afterFinalize(state);
        renderResults(root, summary.n_correct, summary.earnings_cents);
      });
      return;
    }
  };
  await step();
}

async function adminMode(root: HTMLElement, client: RdlabClient, studyId: string) {
  let lineupSeed = 0;
  const refresh = async () => {
    const view = buildDashboard(await client.aggregate(studyId));
    renderDashboard(root, view);
    one(root, "#lineup-new").addEventListener("click", async () => {
      lineupSeed += 1;
      const { svg } = await client.lineup(studyId, lineupSeed);
      one(root, "#lineup-holder").innerHTML = svg;
      one<HTMLButtonElement>(root, "#lineup-reveal").disabled = false;
      one(root, "#lineup-answer").textContent = "";
    });
    one(root, "#lineup-reveal").addEventListener("click", async () => {
      // the answer comes from the sidecar endpoint, never from the SVG
      const ans = await client.lineupAnswer(studyId, lineupSeed);
      one(root, "#lineup-answer").textContent = `Real data: row ${ans.row}, column ${ans.col}`;
    });
  };
  await refresh();
  setInterval(refresh, 15_000);
}

async function boot() {
  const params = new URLSearchParams(window.location.search);
  const studyId = params.get("study");
  const api = params.get("api") ?? window.location.origin;
  const root = document.getElementById("app");
  if (!root) return;
  if (!studyId) {
    root.textContent = "Missing ?study=<id> query parameter.";
    return;
  }
  const client = new RdlabClient(api);
  if (params.get("admin")) {
    await adminMode(root, client, studyId);
  } else {
    await participantMode(root, client, studyId);
  }
}

void boot();
