import { ApiClient, ApiError } from "./api.js";
import { CreateSessionRequest, SessionView } from "./types.js";

export type Screen = "setup" | "question" | "fitting" | "done";

export interface ControllerState {
  screen: Screen;
  view: SessionView | null;
  notice: string | null;
  fieldErrors: string[];
}

export function screenFor(view: SessionView | null): Screen {
  if (view === null) return "setup";
  if (view.status === "done") return "done";
  if (view.status === "awaiting_answer") return "question";
  return "fitting"; // fitting or selecting: poll until interactive
}

function randomKey(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  return `${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * View-model for one live session: holds the latest server snapshot, never
 * fabricates state, and polls while the server is fitting/selecting.
 */
export class SessionController {
  private sessionId: string | null = null;
  private view: SessionView | null = null;
  private notice: string | null = null;
  private fieldErrors: string[] = [];
  private listeners: Array<(s: ControllerState) => void> = [];

  constructor(
    private readonly api: ApiClient,
    private readonly pollIntervalMs = 1000,
  ) {}

  get state(): ControllerState {
    return {
      screen: screenFor(this.view),
      view: this.view,
      notice: this.notice,
      fieldErrors: this.fieldErrors,
    };
  }

  onChange(listener: (s: ControllerState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const l of this.listeners) l(this.state);
  }

  /** Validate and create a session; on validation failure stays on setup. */
  async create(req: CreateSessionRequest): Promise<boolean> {
    this.fieldErrors = [];
    this.notice = null;
    if (!Number.isInteger(req.horizon) || req.horizon < 1) {
      this.fieldErrors = ["horizon must be a positive integer"];
      this.emit();
      return false;
    }
    try {
      this.sessionId = await this.api.createSession(req);
    } catch (err) {
      this.fieldErrors = [describeError(err)];
      this.emit();
      return false;
    }
    await this.refresh();
    return true;
  }

  /** Re-attach to an existing session (e.g. after a hard refresh). */
  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    await this.refresh();
  }

  async refresh(): Promise<SessionView> {
    if (this.sessionId === null) throw new Error("no session");
    this.view = await this.api.getState(this.sessionId);
    this.emit();
    return this.view;
  }

  /**
   * Submit the pending answer. A server conflict (stale question) reloads
   * state and surfaces a non-destructive notice instead of failing.
   */
  async answer(preferred: number, other: number): Promise<void> {
    if (this.sessionId === null || this.view === null) {
      throw new Error("no session");
    }
    this.notice = null;
    try {
      this.view = await this.api.submitAnswer(
        this.sessionId,
        preferred,
        other,
        randomKey(),
      );
      this.emit();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.notice = "The session moved on; reloaded the latest state.";
        await this.refresh();
        return;
      }
      throw err;
    }
  }

  /** Poll (1s default) until the server is awaiting an answer or done. */
  async waitUntilInteractive(timeoutMs = 120_000): Promise<SessionView> {
    const deadline = Date.now() + timeoutMs;
    let view = this.view ?? (await this.refresh());
    while (view.status === "fitting" || view.status === "selecting") {
      if (Date.now() > deadline) {
        throw new Error("timed out waiting for the server to finish fitting");
      }
      await sleep(this.pollIntervalMs);
      view = await this.refresh();
    }
    return view;
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return typeof err.detail === "string"
      ? err.detail
      : JSON.stringify(err.detail);
  }
  return err instanceof Error ? err.message : String(err);
}
