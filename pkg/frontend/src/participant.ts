/**
 * Drives one participant session against a live service.
 *
 * The strategy callback supplies the classification for each trial; the
 * driver owns the flow rules (forward-only, magnitude handling, survey,
 * single finalize).  Used by the browser entry point and by the scripted
 * end-to-end test.
 */

import { RdlabClient, type FinalizeSummary, type TrialPayload } from "./api.js";
import {
  afterAck,
  afterFinalize,
  canFinalize,
  initialState,
  resumeState,
  validateChoice,
  type Choice,
  type FlowState,
} from "./flow.js";

export interface TrialStrategy {
  (payload: TrialPayload, k: number): Choice;
}

export interface CompletedSession {
  sessionId: string;
  summary: FinalizeSummary;
  state: FlowState;
  trialsSeen: number;
}

export async function runParticipant(
  client: RdlabClient,
  studyId: string,
  strategy: TrialStrategy,
  surveyFields: Record<string, string> = {},
): Promise<CompletedSession> {
  const info = await client.openSession(studyId);
  let state = initialState(info.n_trials, info.magnitude_elicitation, 0);
  return completeFrom(client, info.session_id, state, strategy, surveyFields);
}

/** Resume after a disconnect: asks the server where the session stands and
 * continues from the first unanswered trial. */
export async function resumeParticipant(
  client: RdlabClient,
  sessionId: string,
  strategy: TrialStrategy,
  surveyFields: Record<string, string> = {},
): Promise<CompletedSession> {
  const st = await client.sessionState(sessionId);
  const state = resumeState(
    st.n_trials,
    st.answered,
    st.finished,
    st.magnitude_elicitation,
  );
  return completeFrom(client, sessionId, state, strategy, surveyFields);
}

async function completeFrom(
  client: RdlabClient,
  sessionId: string,
  state: FlowState,
  strategy: TrialStrategy,
  surveyFields: Record<string, string>,
): Promise<CompletedSession> {
  let trialsSeen = 0;
  while (state.stage === "trial") {
    const k = state.trialIndex;
    const payload = await client.getTrial(sessionId, k);
    trialsSeen += 1;
    const choice = strategy(payload, k);
    const problem = validateChoice(state, choice);
    if (problem) throw new Error(problem);
    const ack = await client.submitResponse(sessionId, k, {
      reported: choice.reported,
      bonus: choice.bonus,
      magnitude: choice.magnitude ?? null,
    });
    state = afterAck(state, ack.answered);
  }
  if (state.stage === "survey") {
    if (Object.keys(surveyFields).length > 0) {
      await client.submitSurvey(sessionId, surveyFields);
    }
    if (!canFinalize(state)) throw new Error("finalize blocked");
    const summary = await client.finalize(sessionId);
    state = afterFinalize(state);
    return { sessionId, summary, state, trialsSeen };
  }
  if (state.stage === "done") {
    const summary = await client.finalize(sessionId); // idempotent re-read
    return { sessionId, summary, state, trialsSeen };
  }
  throw new Error(`unexpected stage ${state.stage}`);
}
