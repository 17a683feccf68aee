/**
 * Session-driving state machine: one outstanding submission at a time,
 * optimistic concurrency on request_index, 1s polling with a stale flag on
 * network trouble.  DOM-free so it can be tested headlessly.
 */
import { AuditServiceClient, ConflictError, ResponseKind, SessionView } from "./api.js";

export interface ControllerEvents {
  onView: (view: SessionView, stale: boolean) => void;
}

export class SessionController {
  private view: SessionView | null = null;
  private submitting = false;
  private stale = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private client: AuditServiceClient,
    private sessionId: string,
    private events: ControllerEvents,
    private pollMs = 1000,
  ) {}

  get currentView(): SessionView | null {
    return this.view;
  }

  get canSubmit(): boolean {
    return (
      !this.submitting &&
      this.view !== null &&
      this.view.state === "awaiting_ballot"
    );
  }

  private publish(): void {
    if (this.view) {
      this.events.onView(this.view, this.stale);
    }
  }

  async refresh(): Promise<void> {
    try {
      this.view = await this.client.getSession(this.sessionId);
      this.stale = false;
    } catch {
      this.stale = true; // keep showing the last view, visibly stale
    }
    this.publish();
  }

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.pollMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /**
   * Submit exactly one response for the current request.  Re-entrant calls
   * while a submission is in flight are dropped (double-click safety); a
   * conflict means someone else advanced the session, so refresh and let the
   * operator re-read the prompt.
   */
  async submit(kind: ResponseKind, interpretation?: string): Promise<void> {
    if (!this.canSubmit || this.view === null) {
      return;
    }
    this.submitting = true;
    try {
      this.view = await this.client.submitResponse(this.sessionId, {
        request_index: this.view.request_index,
        kind,
        interpretation,
      });
      this.stale = false;
    } catch (err) {
      if (err instanceof ConflictError) {
        await this.refresh();
        return;
      }
      this.stale = true;
    } finally {
      this.submitting = false;
    }
    this.publish();
  }
}

/** Bit-vector for a set of checked candidate indices. */
export function marksToBits(checked: number[], nCandidates: number): string {
  const bits = new Array<string>(nCandidates).fill("0");
  for (const i of checked) {
    bits[i] = "1";
  }
  return bits.join("");
}
