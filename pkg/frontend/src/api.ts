/**
 * Typed client for the audit-session service (schema_version "1").
 *
 * This module is the console's entire network surface; everything rendered
 * comes back through these calls, so a scripted session made with them is
 * exactly what the browser would have produced.
 */

export interface TestConfig {
  alpha: number;
  gamma: number;
  max_draws?: number | null;
}

export interface Manifest {
  schema_version: string;
  candidates: string[];
  S: number;
}

export interface PairTally {
  by: string;
  against: string;
  votes: number;
  requests_answered: number;
  t: number;
  disqualified: boolean;
}

export interface Verdict {
  kind: "consistent" | "inconclusive" | "winner";
  winner: string | null;
  final_risk?: number;
  disqualified?: string[];
  ballots_requested?: number;
}

export interface SessionView {
  schema_version: string;
  session_id: string;
  mode: "bayesian" | "conservative" | "competitive";
  seed: number;
  state: "awaiting_ballot" | "concluded";
  requested_id: string | null;
  request_index: number;
  candidates: string[];
  verdict: Verdict | null;
  // comparison sessions
  draws?: number;
  risk?: number;
  risk_trajectory?: number[];
  delta?: number;
  test?: TestConfig;
  guard_failure?: string | null;
  // competitive sessions
  t?: number;
  ballots_requested?: number;
  current_pair?: [string, string] | null;
  pair_tallies?: PairTally[];
}

export interface CreateSessionRequest {
  schema_version: string;
  mode: "bayesian" | "conservative" | "competitive";
  manifest: Manifest;
  test?: TestConfig;
  seed: number;
  t?: number;
  session_id?: string;
  cvr?: unknown;
  cvrs?: { label: string; table: unknown }[];
}

export type ResponseKind = "interpretation" | "no_ballot" | "wrong_id";

export interface SubmitRequest {
  request_index: number;
  kind: ResponseKind;
  interpretation?: string;
}

export interface SessionSummary {
  session_id: string;
  mode: string;
  state: string;
}

export class ConflictError extends Error {
  constructor(public detail: string) {
    super(`conflict: ${detail}`);
  }
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function asJson(resp: Response): Promise<unknown> {
  const text = await resp.text();
  if (resp.status === 409) {
    throw new ConflictError(text);
  }
  if (!resp.ok) {
    throw new ApiError(resp.status, text);
  }
  return JSON.parse(text);
}

export class AuditServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(body: CreateSessionRequest): Promise<SessionView> {
    const resp = await this.fetchImpl(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await asJson(resp)) as SessionView;
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const resp = await this.fetchImpl(this.url(`/sessions/${sessionId}`));
    return (await asJson(resp)) as SessionView;
  }

  async listSessions(): Promise<SessionSummary[]> {
    const resp = await this.fetchImpl(this.url("/sessions"));
    return (await asJson(resp)) as SessionSummary[];
  }

  async submitResponse(sessionId: string, body: SubmitRequest): Promise<SessionView> {
    const resp = await this.fetchImpl(this.url(`/sessions/${sessionId}/responses`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ schema_version: "1", ...body }),
    });
    return (await asJson(resp)) as SessionView;
  }

  async getTranscript(sessionId: string): Promise<string> {
    const resp = await this.fetchImpl(this.url(`/sessions/${sessionId}/transcript`));
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return resp.text();
  }
}
