import {
  CreateSessionRequest,
  SessionExport,
  SessionView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

async function readBody(resp: Response): Promise<unknown> {
  const text = await resp.text();
  try {
    return text ? JSON.parse(text) : null;
  } catch {
    return text;
  }
}

/** Typed client for the session service; every response is schema-validated. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await readBody(resp);
    if (!resp.ok) {
      throw new ApiError(resp.status, body);
    }
    return body;
  }

  async createSession(req: CreateSessionRequest): Promise<string> {
    const body = await this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(req),
    });
    return (body as { id: string }).id;
  }

  async getState(sessionId: string): Promise<SessionView> {
    return SessionView.parse(await this.request(`/sessions/${sessionId}`));
  }

  async submitAnswer(
    sessionId: string,
    preferred: number,
    other: number,
    idempotencyKey: string,
  ): Promise<SessionView> {
    return SessionView.parse(
      await this.request(`/sessions/${sessionId}/answer`, {
        method: "POST",
        body: JSON.stringify({
          preferred,
          other,
          idempotency_key: idempotencyKey,
        }),
      }),
    );
  }

  async exportSession(sessionId: string): Promise<SessionExport> {
    return SessionExport.parse(
      await this.request(`/sessions/${sessionId}/export`),
    );
  }
}
