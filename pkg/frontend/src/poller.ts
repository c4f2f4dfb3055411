/** Polling wrapper over the DPI getNetworks endpoint.
 *
 * Page code registers callbacks via getNetworks(cb); each completed poll
 * invokes every callback once with the fingerprint array. A failed poll
 * invokes nothing and the cycle is simply skipped. At most one request is
 * ever in flight, and the next one starts no sooner than the configured
 * interval after the previous one finished.
 */

import type { WireObservation } from "./types";

export const MIN_POLL_INTERVAL_MS = 250;

export interface ShimConfig {
  dpiBaseUrl: string;
  sessionId: string;
  pollIntervalMs?: number;
}

export type FingerprintCallback = (networks: WireObservation[]) => void;

type FetchLike = (url: string) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class NetworkPoller {
  private readonly intervalMs: number;
  private readonly callbacks: FingerprintCallback[] = [];
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private running = false;

  constructor(
    private readonly config: ShimConfig,
    private readonly fetchImpl: FetchLike = (url) => fetch(url),
    private readonly log: { warn(msg: string): void } = console,
  ) {
    this.intervalMs = Math.max(config.pollIntervalMs ?? MIN_POLL_INTERVAL_MS, MIN_POLL_INTERVAL_MS);
  }

  getNetworks(callback: FingerprintCallback): void {
    this.callbacks.push(callback);
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.poll();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  /** One poll; also the chain link that schedules the next one. */
  private async poll(): Promise<void> {
    if (!this.running || this.inFlight) return;
    this.inFlight = true;
    const url =
      `${this.config.dpiBaseUrl}/getNetworks?session=` +
      encodeURIComponent(this.config.sessionId);
    try {
      const resp = await this.fetchImpl(url);
      if (resp.ok) {
        const networks = (await resp.json()) as WireObservation[];
        for (const cb of this.callbacks) cb(networks);
      } else {
        this.log.warn(`getNetworks poll skipped: HTTP ${resp.status}`);
      }
    } catch (err) {
      this.log.warn(`getNetworks poll skipped: ${String(err)}`);
    } finally {
      this.inFlight = false;
      if (this.running) {
        this.timer = setTimeout(() => void this.poll(), this.intervalMs);
      }
    }
  }
}
