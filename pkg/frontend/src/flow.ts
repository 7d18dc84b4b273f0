/**
 * Participant flow state machine.
 *
 * Practice screens (with instant feedback) come first, then the paid
 * classification trials, which are strictly forward-only: no revisiting,
 * no correctness feedback, finalize exactly once.  All transitions are
 * pure so the machine is unit-testable without a DOM or a server.
 */

import type { BonusChoice } from "./api.js";

export type Stage = "practice" | "trial" | "survey" | "done";

export interface Choice {
  reported: boolean;
  bonus: BonusChoice;
  magnitude?: number | null;
}

export interface FlowState {
  stage: Stage;
  practiceIndex: number;
  nPractice: number;
  trialIndex: number; // number of answered trials == index of current trial
  nTrials: number;
  magnitudeElicitation: boolean;
  finalized: boolean;
}

export function initialState(
  nTrials: number,
  magnitudeElicitation: boolean,
  nPractice: number,
): FlowState {
  return {
    stage: nPractice > 0 ? "practice" : "trial",
    practiceIndex: 0,
    nPractice,
    trialIndex: 0,
    nTrials,
    magnitudeElicitation,
    finalized: false,
  };
}

/** Resume a session mid-flight: practice is skipped, the current trial is
 * the first unanswered one. */
export function resumeState(
  nTrials: number,
  answered: number,
  finished: boolean,
  magnitudeElicitation: boolean,
): FlowState {
  return {
    stage: finished ? "done" : answered >= nTrials ? "survey" : "trial",
    practiceIndex: 0,
    nPractice: 0,
    trialIndex: answered,
    nTrials,
    magnitudeElicitation,
    finalized: finished,
  };
}

/** The magnitude field is shown only when a discontinuity is reported in a
 * study that elicits magnitudes. */
export function magnitudeRequired(state: FlowState, reported: boolean): boolean {
  return state.magnitudeElicitation && reported;
}

export function validateChoice(state: FlowState, choice: Choice): string | null {
  if (state.stage !== "trial") return "not in a trial";
  const needs = magnitudeRequired(state, choice.reported);
  const has = choice.magnitude !== undefined && choice.magnitude !== null;
  if (needs && !has) return "magnitude estimate required";
  if (!needs && has) return "magnitude estimate not expected";
  return null;
}

/** Backward navigation is disabled during paid trials. */
export function canGoBack(state: FlowState): boolean {
  return state.stage === "practice" && state.practiceIndex > 0;
}

export function advancePractice(state: FlowState): FlowState {
  if (state.stage !== "practice") throw new Error("not in practice");
  const next = state.practiceIndex + 1;
  if (next >= state.nPractice) {
    return { ...state, stage: "trial", practiceIndex: next };
  }
  return { ...state, practiceIndex: next };
}

export function backPractice(state: FlowState): FlowState {
  if (!canGoBack(state)) throw new Error("cannot navigate back");
  return { ...state, practiceIndex: state.practiceIndex - 1 };
}

/** Apply a server ack ({answered}) after a successful submit. */
export function afterAck(state: FlowState, answered: number): FlowState {
  if (state.stage !== "trial") throw new Error("not in a trial");
  if (answered === state.trialIndex + 1) {
    const done = answered >= state.nTrials;
    return { ...state, trialIndex: answered, stage: done ? "survey" : "trial" };
  }
  if (answered === state.trialIndex) return state; // duplicate ack
  throw new Error(`out-of-order ack: answered=${answered}`);
}

/** Finalize may fire exactly once, after the survey. */
export function canFinalize(state: FlowState): boolean {
  return state.stage === "survey" && !state.finalized;
}

export function afterFinalize(state: FlowState): FlowState {
  if (!canFinalize(state)) throw new Error("finalize not allowed");
  return { ...state, stage: "done", finalized: true };
}
