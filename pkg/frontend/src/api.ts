// Thin fetch wrappers over the local service API.

import { AcceptReport, AssetTemplate, LayoutState, RenderResponse } from "./types.js";

export class ApiClient {
  constructor(private base = "") {}

  async render(body: object): Promise<RenderResponse> {
    const resp = await fetch(`${this.base}/api/render`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await resp.json()) as RenderResponse;
  }

  async templates(): Promise<AssetTemplate[]> {
    const resp = await fetch(`${this.base}/api/templates`);
    const body = (await resp.json()) as { templates: AssetTemplate[] };
    return body.templates;
  }

  async procgen(seed: number, attempt: number): Promise<{ layout: LayoutState; accept: AcceptReport }> {
    const resp = await fetch(`${this.base}/api/procgen`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, seed, attempt }),
    });
    return (await resp.json()) as { layout: LayoutState; accept: AcceptReport };
  }
}
