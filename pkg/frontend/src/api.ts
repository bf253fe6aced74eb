// REST client for teacher feedback. One POST per click: while a request
// is in flight, further sends are refused without touching the network.

import type { ActionSource } from "./types.js";

export interface ActionResult {
  ok: boolean;
  status: number;
  error?: string;
}

export type FetchLike = (url: string, init: {
  method: string;
  headers: Record<string, string>;
  body: string;
}) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ActionClient {
  private inFlight = false;

  constructor(
    private sessionUrl: string,
    private fetchFn: FetchLike = fetch as unknown as FetchLike,
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  async send(action: string, source: ActionSource): Promise<ActionResult> {
    if (this.inFlight) {
      return { ok: false, status: 0, error: "request already in flight" };
    }
    this.inFlight = true;
    try {
      const resp = await this.fetchFn(`${this.sessionUrl}/action`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ action, source }),
      });
      if (resp.status === 200) {
        return { ok: true, status: 200 };
      }
      let message = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body && body.error) message = body.error;
      } catch {
        // keep the status text
      }
      return { ok: false, status: resp.status, error: message };
    } catch (exc) {
      return { ok: false, status: 0, error: String(exc) };
    } finally {
      this.inFlight = false;
    }
  }
}

export async function fetchSnapshot(
  sessionUrl: string,
  fetchFn: FetchLike = fetch as unknown as FetchLike,
): Promise<unknown> {
  const resp = await fetchFn(`${sessionUrl}/state`, {
    method: "GET",
    headers: {},
    body: undefined as unknown as string,
  });
  return resp.json();
}
