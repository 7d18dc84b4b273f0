/**
 * Thin DOM renderers for the browser client.  All decision logic lives in
 * flow.ts / dashboard.ts; these functions only translate state to markup.
 * The stimulus SVG is inlined untouched; nothing is charted client-side.
 */

import type { TrialPayload } from "./api.js";
import type { DashboardView } from "./dashboard.js";
import type { FlowState } from "./flow.js";
import { magnitudeRequired } from "./flow.js";
import { PRACTICE_TASKS } from "./practice.js";

export function renderPractice(el: HTMLElement, state: FlowState): void {
  const task = PRACTICE_TASKS[state.practiceIndex];
  if (!task) return;
  el.innerHTML = `
    <h2>Practice ${state.practiceIndex + 1} of ${state.nPractice}</h2>
    <div class="stimulus">${task.svg}</div>
    <p>Does the underlying relationship jump at the vertical line?</p>
    <button id="practice-yes">Discontinuity</button>
    <button id="practice-no">No discontinuity</button>
    <p id="practice-feedback" role="status"></p>
    <button id="practice-next" disabled>Continue</button>
  `;
}

export function renderTrial(el: HTMLElement, state: FlowState, payload: TrialPayload): void {
  // forward-only: deliberately no back control during paid trials
  const magnitudeBlock = state.magnitudeElicitation
    ? `<label id="magnitude-label" hidden>
         Estimated size: <input id="magnitude" type="number" step="0.01"/>
       </label>`
    : "";
  el.innerHTML = `
    <h2>Graph ${payload.trial_index + 1} of ${payload.n_trials}</h2>
    <div class="stimulus">${payload.svg}</div>
    <fieldset>
      <legend>Is there a discontinuity at the vertical line (x = 0)?</legend>
      <label><input type="radio" name="reported" value="yes"/> Yes</label>
      <label><input type="radio" name="reported" value="no"/> No</label>
    </fieldset>
    ${magnitudeBlock}
    <fieldset>
      <legend>Bonus for this graph</legend>
      <label><input type="radio" name="bonus" value="wager"/> 40&cent; if correct, 0 otherwise</label>
      <label><input type="radio" name="bonus" value="fixed"/> 20&cent; regardless</label>
    </fieldset>
    <button id="submit-trial">Submit answer</button>
  `;
  if (state.magnitudeElicitation) {
    const label = el.querySelector<HTMLElement>("#magnitude-label")!;
    el.querySelectorAll<HTMLInputElement>('input[name="reported"]').forEach((radio) => {
      radio.addEventListener("change", () => {
        label.hidden = !magnitudeRequired(state, radio.value === "yes" && radio.checked);
      });
    });
  }
}

export function renderSurvey(el: HTMLElement, fields: string[]): void {
  const inputs = fields
    .map(
      (f) =>
        `<label>${f}: <input data-survey-field="${f}" type="text"/></label>`,
    )
    .join("\n");
  el.innerHTML = `
    <h2>A few final questions</h2>
    ${inputs}
    <button id="finish">Finish and see results</button>
  `;
}

export function renderResults(el: HTMLElement, nCorrect: number, earningsCents: number): void {
  el.innerHTML = `
    <h2>All done</h2>
    <p>You classified ${nCorrect} of 11 graphs correctly.</p>
    <p>Total earnings: $${(earningsCents / 100).toFixed(2)}.</p>
  `;
}

export function renderDashboard(el: HTMLElement, view: DashboardView): void {
  const curveRows = view.curves
    .map(
      (p) =>
        `<tr><td>${p.arm}</td><td>${p.d}</td><td>${p.p_hat}</td>` +
        `<td>${p.ci_low}</td><td>${p.ci_high}</td><td>${p.n}</td></tr>`,
    )
    .join("");
  const riskRows = view.risks
    .map(
      (r) =>
        `<tr><td>${r.section}</td><td>${r.arm}</td><td>${r.col1}</td>` +
        `<td>${r.col2}</td><td>${r.col3}</td><td>${r.col4}</td></tr>`,
    )
    .join("");
  el.innerHTML = `
    <h2>Study ${view.studyId}</h2>
    <p>${view.progress.finished} finished / ${view.progress.opened} opened sessions,
       ${view.progress.responses} responses.</p>
    <h3>Power curves</h3>
    <table id="power-table">
      <thead><tr><th>arm</th><th>|d|</th><th>share reporting</th>
        <th>ci low</th><th>ci high</th><th>n</th></tr></thead>
      <tbody>${curveRows}</tbody>
    </table>
    <h3>Risk table</h3>
    <table id="risk-table">
      <thead><tr><th>measure</th><th>arm</th><th>(1)</th><th>(2)</th>
        <th>(3)</th><th>(4)</th></tr></thead>
      <tbody>${riskRows}</tbody>
    </table>
    <h3>Lineup viewer</h3>
    <div id="lineup-holder"></div>
    <button id="lineup-new">New lineup</button>
    <button id="lineup-reveal" disabled>Reveal answer</button>
    <p id="lineup-answer" role="status"></p>
  `;
}
