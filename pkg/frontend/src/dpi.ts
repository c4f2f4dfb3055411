/** Thin fetch client for the DPI server endpoints. */

import type {
  DevicePoint,
  EvaluateResponse,
  RuleDiagnostic,
  VenueInfo,
  WireObservation,
} from "./types";

export type PutRulesResult =
  | { ok: true; rules: number; snippets: number }
  | { ok: false; diagnostic: RuleDiagnostic };

export class DpiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string, params?: Record<string, string>): string {
    const query = params ? `?${new URLSearchParams(params)}` : "";
    return `${this.baseUrl}${path}${query}`;
  }

  async getNetworks(session: string): Promise<WireObservation[]> {
    const resp = await fetch(this.url("/getNetworks", { session }));
    if (!resp.ok) throw new Error(`getNetworks: HTTP ${resp.status}`);
    return (await resp.json()) as WireObservation[];
  }

  async evaluate(session: string, now?: string): Promise<EvaluateResponse> {
    const params: Record<string, string> = { session };
    if (now !== undefined) params.now = now;
    const resp = await fetch(this.url("/evaluate", params));
    if (!resp.ok) throw new Error(`evaluate: HTTP ${resp.status}`);
    return (await resp.json()) as EvaluateResponse;
  }

  async move(session: string, point: DevicePoint): Promise<WireObservation[]> {
    const resp = await fetch(this.url("/sim/move", { session }), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(point),
    });
    if (!resp.ok) throw new Error(`sim/move: HTTP ${resp.status}`);
    return (await resp.json()) as WireObservation[];
  }

  async venue(): Promise<VenueInfo> {
    const resp = await fetch(this.url("/venue"));
    if (!resp.ok) throw new Error(`venue: HTTP ${resp.status}`);
    return (await resp.json()) as VenueInfo;
  }

  async rules(): Promise<string> {
    const resp = await fetch(this.url("/rules"));
    if (!resp.ok) throw new Error(`rules: HTTP ${resp.status}`);
    return await resp.text();
  }

  /** PUT the ruleset; 422 diagnostics come back as data, not exceptions. */
  async putRules(text: string): Promise<PutRulesResult> {
    const resp = await fetch(this.url("/rules"), {
      method: "PUT",
      headers: { "Content-Type": "text/plain; charset=utf-8" },
      body: text,
    });
    if (resp.status === 422) {
      return { ok: false, diagnostic: (await resp.json()) as RuleDiagnostic };
    }
    if (!resp.ok) throw new Error(`rules: HTTP ${resp.status}`);
    const body = (await resp.json()) as { rules: number; snippets: number };
    return { ok: true, ...body };
  }

  async page(mode: "filtered" | "annotated", session: string): Promise<string> {
    const resp = await fetch(this.url("/page", { mode, session }));
    if (!resp.ok) throw new Error(`page: HTTP ${resp.status}`);
    return await resp.text();
  }
}
