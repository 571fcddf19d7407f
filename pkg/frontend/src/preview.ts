// Debounced live-preview scheduler. Edits call notify(); after a
// trailing debounce the current layout is rendered through the
// transport. Responses are matched by request hash, so a render for an
// outdated layout can never overwrite a newer preview.

import { exportLayout, layoutHash } from "./layout.js";
import { LayoutState, RenderResponse } from "./types.js";

export interface PreviewTransport {
  render(body: object): Promise<RenderResponse>;
}

export interface PreviewDisplay {
  hash: string;
  response: RenderResponse;
}

export interface PreviewEvents {
  onDisplay?(display: PreviewDisplay): void;
  onError?(message: string, violations?: string[]): void;
  onOffline?(): void;
}

export class PreviewScheduler {
  requestCount = 0;
  displayed: PreviewDisplay | null = null;

  private timer: ReturnType<typeof setTimeout> | null = null;
  private latestHash = "";
  private pending: LayoutState | null = null;
  private flags: Record<string, unknown>;

  constructor(
    private transport: PreviewTransport,
    private events: PreviewEvents = {},
    private debounceMs = 300,
    flags: Record<string, unknown> = {},
  ) {
    this.flags = flags;
  }

  /** Called on every edit; trailing debounce, newest layout wins. */
  notify(layout: LayoutState): void {
    this.pending = layout;
    this.latestHash = layoutHash(layout, this.flags);
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  /** The displayed preview is stale iff it does not match this layout. */
  isStale(layout: LayoutState): boolean {
    if (!this.displayed) return true;
    return this.displayed.hash !== layoutHash(layout, this.flags);
  }

  private async fire(): Promise<void> {
    if (!this.pending) return;
    const layout = this.pending;
    const hash = layoutHash(layout, this.flags);
    this.requestCount += 1;
    let response: RenderResponse;
    try {
      response = await this.transport.render({
        v: 1,
        layout: exportLayout(layout),
        ...this.flags,
      });
    } catch (err) {
      this.events.onOffline?.();
      return;
    }
    if ((response as unknown as { error?: string }).error) {
      const body = response as unknown as { error: string; violations?: string[] };
      this.events.onError?.(body.error, body.violations);
      return;
    }
    if (hash !== this.latestHash) return; // superseded by a newer edit
    this.displayed = { hash, response };
    this.events.onDisplay?.(this.displayed);
  }
}
