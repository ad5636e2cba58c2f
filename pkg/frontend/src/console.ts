/**
 * Mission console state: folds the execution event stream into what the
 * live view renders (current hand, timeline, drone track, stop button).
 */
import type { TraceEventJson } from "./types.js";

export type EstopState = "armed" | "requested" | "stopped";

export interface TrackPoint {
  t: number;
  lat: number;
  lon: number;
  alt: number;
}

export class MissionConsole {
  events: TraceEventJson[] = [];
  currentHand: number | null = null;
  satisfied: Set<string> = new Set();
  running: Set<string> = new Set();
  track: TrackPoint[] = [];
  battery: number | null = null;
  status: string | null = null;
  estop: EstopState = "armed";
  lastSeq = -1;

  /** Apply one event; duplicates (replays) are ignored by sequence number. */
  apply(event: TraceEventJson): void {
    if (event.seq <= this.lastSeq) return;
    this.lastSeq = event.seq;
    this.events.push(event);
    switch (event.event) {
      case "HandStarted":
        this.currentHand = event.hand ?? null;
        this.satisfied = new Set();
        this.running = new Set();
        break;
      case "CardStarted":
        if (event.card) this.running.add(event.card);
        break;
      case "CardSatisfied":
        if (event.card) {
          this.running.delete(event.card);
          this.satisfied.add(event.card);
        }
        break;
      case "CardTerminated":
        if (event.card) this.running.delete(event.card);
        break;
      case "Telemetry":
        if (event.lat !== undefined && event.lon !== undefined) {
          this.track.push({ t: event.t, lat: event.lat, lon: event.lon,
                            alt: event.alt ?? 0 });
        }
        if (event.battery !== undefined) this.battery = event.battery;
        break;
      case "EmergencyStop":
        this.estop = "stopped";
        break;
      case "DeckEnded":
        this.status = event.status ?? null;
        this.currentHand = null;
        if (this.estop === "requested") this.estop = "stopped";
        break;
      default:
        break;
    }
  }

  requestEstop(): void {
    if (this.estop === "armed") this.estop = "requested";
  }

  /** True while the stop button should accept clicks. */
  get estopEnabled(): boolean {
    return this.estop === "armed" && this.status === null;
  }

  get finished(): boolean {
    return this.status !== null;
  }
}
