/**
 * Typed client for the session service.
 * Choice submission is idempotent on the server per (round, index), so a
 * retry after a network failure can safely resend the same pair.
 */

import type {
  CreateSessionRequest,
  DatasetsResponse,
  SessionView,
} from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, detail);
}

export class SessionApi {
  constructor(private readonly base: string = '') {}

  async listDatasets(): Promise<DatasetsResponse> {
    const response = await fetch(`${this.base}/datasets`);
    if (!response.ok) return parseError(response);
    return response.json();
  }

  async createSession(request: CreateSessionRequest): Promise<SessionView> {
    const response = await fetch(`${this.base}/sessions`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
    if (!response.ok) return parseError(response);
    return response.json();
  }

  async submitChoice(sessionId: string, round: number, index: number): Promise<SessionView> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/choice`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ round, index }),
    });
    if (!response.ok) return parseError(response);
    return response.json();
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const response = await fetch(`${this.base}/sessions/${sessionId}`);
    if (!response.ok) return parseError(response);
    return response.json();
  }
}
