/**
 * Typed client for the experiment service HTTP/JSON API.
 *
 * Participant-facing payloads never contain truth metadata; the client
 * types below are the complete schema a session sees.
 */

export interface SessionInfo {
  session_id: string;
  n_trials: number;
  magnitude_elicitation: boolean;
}

export interface SessionState {
  session_id: string;
  n_trials: number;
  answered: number;
  finished: boolean;
  magnitude_elicitation: boolean;
}

export interface TrialPayload {
  session_id: string;
  trial_index: number;
  n_trials: number;
  svg: string;
  magnitude_elicitation: boolean;
}

export type BonusChoice = "wager" | "fixed";

export interface ResponseBody {
  reported: boolean;
  bonus: BonusChoice;
  magnitude?: number | null;
}

export interface FinalizeSummary {
  session_id: string;
  n_correct: number;
  earnings_cents: number;
}

export interface PowerPoint {
  d: number;
  p_hat: number;
  ci_low: number;
  ci_high: number;
  n: number;
}

export interface RiskRow {
  arm: string;
  type1: number;
  type2_at: number;
  risk_equal: number;
  risk_kappa4: number;
}

export interface Aggregate {
  study_id: string;
  arms: Record<string, unknown>;
  progress: {
    sessions_opened: number;
    sessions_finished: number;
    responses: number;
  };
  power_curves: Record<string, PowerPoint[]>;
  risk_table: { classical: RiskRow[]; as: RiskRow[] };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    throw new ApiError(res.status, `${init?.method ?? "GET"} ${url}: ${await res.text()}`);
  }
  return (await res.json()) as T;
}

export class RdlabClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  openSession(studyId: string): Promise<SessionInfo> {
    return request(this.url(`/studies/${studyId}/sessions`), { method: "POST" });
  }

  sessionState(sessionId: string): Promise<SessionState> {
    return request(this.url(`/sessions/${sessionId}`));
  }

  getTrial(sessionId: string, k: number): Promise<TrialPayload> {
    return request(this.url(`/sessions/${sessionId}/trials/${k}`));
  }

  /** Submits are idempotent server-side, so a dropped response is safely
   * retried with the identical payload. */
  async submitResponse(
    sessionId: string,
    k: number,
    body: ResponseBody,
  ): Promise<{ answered: number }> {
    const init: RequestInit = {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    };
    const url = this.url(`/sessions/${sessionId}/trials/${k}/response`);
    try {
      return await request(url, init);
    } catch (err) {
      if (err instanceof ApiError) throw err; // server judged it; don't retry
      return await request(url, init); // network hiccup: one idempotent retry
    }
  }

  submitSurvey(sessionId: string, fields: Record<string, string>): Promise<unknown> {
    return request(this.url(`/sessions/${sessionId}/survey`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ fields }),
    });
  }

  finalize(sessionId: string, attentionCheckPassed?: boolean): Promise<FinalizeSummary> {
    return request(this.url(`/sessions/${sessionId}/finalize`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(
        attentionCheckPassed === undefined
          ? {}
          : { attention_check_passed: attentionCheckPassed },
      ),
    });
  }

  aggregate(studyId: string): Promise<Aggregate> {
    return request(this.url(`/studies/${studyId}/aggregate`));
  }

  async exportCsv(studyId: string): Promise<string> {
    const res = await fetch(this.url(`/studies/${studyId}/export.csv`));
    if (!res.ok) throw new ApiError(res.status, "export.csv failed");
    return await res.text();
  }

  lineup(studyId: string, seed: number): Promise<{ svg: string; seed: number }> {
    return request(this.url(`/studies/${studyId}/lineup?seed=${seed}`));
  }

  lineupAnswer(studyId: string, seed: number): Promise<{ row: number; col: number }> {
    return request(this.url(`/studies/${studyId}/lineup/${seed}/answer`));
  }
}
