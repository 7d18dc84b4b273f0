/**
 * Admin dashboard view model: power curves and risk rows derived solely
 * from the aggregate endpoint.
 *
 * All displayed numbers are formatted to six decimals, matching the CSV
 * export's format exactly so the two can be compared byte-for-byte.
 */

import type { Aggregate } from "./api.js";

export const NUM_DIGITS = 6;

export function fmt(x: number): string {
  return x.toFixed(NUM_DIGITS);
}

export interface CurvePointView {
  arm: string;
  d: string;
  p_hat: string;
  ci_low: string;
  ci_high: string;
  n: string;
}

export interface RiskRowView {
  section: "classical" | "as";
  arm: string;
  col1: string;
  col2: string;
  col3: string;
  col4: string;
}

export interface DashboardView {
  studyId: string;
  progress: { opened: number; finished: number; responses: number };
  curves: CurvePointView[];
  risks: RiskRowView[];
}

export function buildDashboard(agg: Aggregate): DashboardView {
  const curves: CurvePointView[] = [];
  for (const arm of Object.keys(agg.power_curves).sort()) {
    for (const p of agg.power_curves[arm] ?? []) {
      curves.push({
        arm,
        d: fmt(p.d),
        p_hat: fmt(p.p_hat),
        ci_low: fmt(p.ci_low),
        ci_high: fmt(p.ci_high),
        n: String(p.n),
      });
    }
  }
  const risks: RiskRowView[] = [];
  for (const section of ["classical", "as"] as const) {
    for (const row of agg.risk_table[section]) {
      risks.push({
        section,
        arm: row.arm,
        col1: fmt(row.type1),
        col2: fmt(row.type2_at),
        col3: fmt(row.risk_equal),
        col4: fmt(row.risk_kappa4),
      });
    }
  }
  return {
    studyId: agg.study_id,
    progress: {
      opened: agg.progress.sessions_opened,
      finished: agg.progress.sessions_finished,
      responses: agg.progress.responses,
    },
    curves,
    risks,
  };
}

export interface CsvPowerRow {
  arm: string;
  d: string;
  p_hat: string;
  ci_low: string;
  ci_high: string;
  n: string;
}

/** Parse the power rows of the export CSV into comparable records. */
export function parsePowerCsv(text: string): CsvPowerRow[] {
  const rows: CsvPowerRow[] = [];
  for (const line of text.split("\n")) {
    if (!line.startsWith("power,")) continue;
    const parts = line.split(",");
    if (parts.length !== 7) continue;
    rows.push({
      arm: parts[1]!,
      d: parts[2]!,
      p_hat: parts[3]!,
      ci_low: parts[4]!,
      ci_high: parts[5]!,
      n: parts[6]!,
    });
  }
  return rows;
}

/** True when every dashboard curve point byte-matches a CSV row. */
export function curvesMatchCsv(view: DashboardView, csvText: string): boolean {
  const csvRows = parsePowerCsv(csvText);
  if (csvRows.length !== view.curves.length) return false;
  const key = (r: { arm: string; d: string }) => `${r.arm}@${r.d}`;
  const byKey = new Map(csvRows.map((r) => [key(r), r]));
  for (const point of view.curves) {
    const row = byKey.get(key(point));
    if (!row) return false;
    if (
      row.p_hat !== point.p_hat ||
      row.ci_low !== point.ci_low ||
      row.ci_high !== point.ci_high ||
      row.n !== point.n
    ) {
      return false;
    }
  }
  return true;
}
