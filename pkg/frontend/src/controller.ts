/** Venue console state machine, kept free of DOM concerns for testing.
 *
 * Drag gestures arrive as a stream of requested positions. Moves are
 * serialized: one POST at a time, and while one is in flight only the
 * newest requested position is remembered, so the panels always end up
 * reflecting the latest acknowledged move.
 */

import type { DpiClient } from "./dpi";
import type {
  DevicePoint,
  EvaluateResponse,
  VenueInfo,
  WireObservation,
} from "./types";

export interface ConsoleState {
  venue: VenueInfo | null;
  rulesText: string;
  position: DevicePoint;
  fingerprint: WireObservation[];
  evaluation: EvaluateResponse;
  diagnostic: string | null;
  transportError: string | null;
}

export class ConsoleController {
  readonly state: ConsoleState = {
    venue: null,
    rulesText: "",
    position: { x: 0, y: 0, floor: 0 },
    fingerprint: [],
    evaluation: { fired: [], snippets: [] },
    diagnostic: null,
    transportError: null,
  };

  private moveInFlight = false;
  private pendingMove: DevicePoint | null = null;
  private settled: Promise<void> = Promise.resolve();
  private release: () => void = () => {};

  constructor(
    private readonly client: DpiClient,
    private readonly session: string,
    private readonly onChange: (state: ConsoleState) => void = () => {},
  ) {}

  async init(): Promise<void> {
    this.state.venue = await this.client.venue();
    this.state.rulesText = await this.client.rules();
    this.onChange(this.state);
  }

  /** Latest-wins move request; safe to call on every drag event. */
  requestMove(point: DevicePoint): void {
    this.pendingMove = point;
    if (!this.moveInFlight) {
      this.settled = new Promise((resolve) => {
        this.release = resolve;
      });
      void this.pump();
    }
  }

  /** Resolves once every requested move has been acknowledged. */
  idle(): Promise<void> {
    return this.settled;
  }

  private async pump(): Promise<void> {
    while (this.pendingMove !== null) {
      const point = this.pendingMove;
      this.pendingMove = null;
      this.moveInFlight = true;
      try {
        this.state.fingerprint = await this.client.move(this.session, point);
        this.state.evaluation = await this.client.evaluate(this.session);
        this.state.position = point;
        this.state.transportError = null;
      } catch (err) {
        // keep the last good panels; surface the failure non-modally
        this.state.transportError = String(err);
      } finally {
        this.moveInFlight = false;
      }
      this.onChange(this.state);
    }
    this.release();
  }

  async submitRules(text: string): Promise<boolean> {
    try {
      const result = await this.client.putRules(text);
      if (!result.ok) {
        const d = result.diagnostic;
        const where = d.line !== undefined ? ` (line ${d.line}, column ${d.column})` : "";
        this.state.diagnostic = `${d.error}${where}`;
        this.onChange(this.state);
        return false;
      }
      this.state.diagnostic = null;
      this.state.rulesText = text;
      this.state.evaluation = await this.client.evaluate(this.session);
      this.state.transportError = null;
      this.onChange(this.state);
      return true;
    } catch (err) {
      this.state.transportError = String(err);
      this.onChange(this.state);
      return false;
    }
  }
}
