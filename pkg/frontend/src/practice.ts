/**
 * Canned practice tasks with instant feedback.
 *
 * Practice graphs ship with the client and carry known answers; the paid
 * trials that follow never reveal correctness.
 */

export interface PracticeTask {
  svg: string;
  hasDiscontinuity: boolean;
  explanation: string;
}

function stubPlot(jump: number): string {
  const pts: string[] = [];
  for (let i = 0; i < 20; i++) {
    const x = -1 + (i + 0.5) / 10;
    const y = 0.3 * x + (x >= 0 ? jump : 0);
    const px = 40 + ((x + 1) / 2) * 320;
    const py = 120 - y * 60;
    pts.push(`<circle cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" r="3" fill="black"/>`);
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="400" height="240" viewBox="0 0 400 240">` +
    `<rect width="400" height="240" fill="white" stroke="black"/>` +
    `<line x1="200" y1="10" x2="200" y2="230" stroke="black" stroke-dasharray="4,3"/>` +
    pts.join("") +
    `</svg>`
  );
}

export const PRACTICE_TASKS: PracticeTask[] = [
  {
    svg: stubPlot(0.9),
    hasDiscontinuity: true,
    explanation:
      "The points jump upward where the series crosses the vertical line: discontinuity.",
  },
  {
    svg: stubPlot(0),
    hasDiscontinuity: false,
    explanation:
      "The points continue smoothly through the vertical line: no discontinuity.",
  },
];

export function practiceFeedback(task: PracticeTask, reported: boolean): string {
  const correct = reported === task.hasDiscontinuity;
  return `${correct ? "Correct." : "Not quite."} ${task.explanation}`;
}
