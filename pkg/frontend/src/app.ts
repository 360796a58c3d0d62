// Controller: owns the session state machine and pushes rendered markup
// into a host. One in-flight request at a time; controls are disabled
// while busy so double-clicks collapse into a single call.

import { ApiError, ClarifyApi, Session } from "./api.js";
import {
  renderAnswer,
  renderClarifications,
  renderError,
  renderLoading,
  renderNotFound,
} from "./view.js";

export interface Host {
  setContent(html: string): void;
  setBusy(busy: boolean): void;
}

export type Phase = "idle" | "loading" | "ready" | "answered" | "error" | "not_found";

export class App {
  phase: Phase = "idle";
  session: Session | null = null;
  private lastQuery = "";
  private busy = false;

  constructor(
    private api: ClarifyApi,
    private host: Host,
  ) {}

  async submit(query: string): Promise<void> {
    const trimmed = query.trim();
    if (!trimmed || this.busy) {
      return;
    }
    this.lastQuery = trimmed;
    await this.run(async () => {
      this.session = await this.api.clarify(trimmed);
      this.phase = "ready";
      this.host.setContent(renderClarifications(this.session));
    });
  }

  async choose(index: number): Promise<void> {
    if (!this.session || this.busy) {
      return;
    }
    const item = this.session.clarifications.items[index];
    if (!item) {
      return;
    }
    const sessionId = this.session.session_id;
    await this.run(async () => {
      const result = await this.api.choose(sessionId, index);
      this.phase = "answered";
      this.host.setContent(renderAnswer(item, result));
    });
  }

  async retry(): Promise<void> {
    if (this.lastQuery) {
      await this.submit(this.lastQuery);
    }
  }

  private async run(action: () => Promise<void>): Promise<void> {
    this.busy = true;
    this.host.setBusy(true);
    this.phase = "loading";
    this.host.setContent(renderLoading());
    try {
      await action();
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.phase = "not_found";
        this.session = null;
        this.host.setContent(renderNotFound());
      } else {
        this.phase = "error";
        const message = err instanceof ApiError ? err.message : String(err);
        this.host.setContent(renderError(`service error: ${message}`));
      }
    } finally {
      this.busy = false;
      this.host.setBusy(false);
    }
  }
}
