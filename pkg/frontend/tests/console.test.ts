import { describe, expect, it } from "vitest";

import { MissionConsole } from "../src/console.js";
import type { TraceEventJson } from "../src/types.js";

const ev = (seq: number, event: string, extra: Partial<TraceEventJson> = {}): TraceEventJson =>
  ({ t: seq / 10, seq, event, ...extra });

describe("MissionConsole state", () => {
  it("tracks the current hand from HandStarted events", () => {
    const console_ = new MissionConsole();
    console_.apply(ev(0, "DeckStarted"));
    console_.apply(ev(1, "HandStarted", { hand: 0, iteration: 0 }));
    expect(console_.currentHand).toBe(0);
    console_.apply(ev(2, "HandStarted", { hand: 2, iteration: 0 }));
    expect(console_.currentHand).toBe(2);
    console_.apply(ev(3, "DeckEnded", { status: "completed" }));
    expect(console_.currentHand).toBeNull();
    expect(console_.status).toBe("completed");
  });

  it("highlight always matches the latest HandStarted event", () => {
    const console_ = new MissionConsole();
    const hands = [0, 1, 0, 1, 2];
    let seq = 0;
    let latest: number | null = null;
    console_.apply(ev(seq++, "DeckStarted"));
    for (const hand of hands) {
      console_.apply(ev(seq++, "HandStarted", { hand, iteration: 0 }));
      latest = hand;
      console_.apply(ev(seq++, "CardStarted", { card: `c${hand}` }));
      expect(console_.currentHand).toBe(latest);
    }
  });

  it("folds card lifecycle into running and satisfied sets", () => {
    const console_ = new MissionConsole();
    console_.apply(ev(0, "HandStarted", { hand: 0, iteration: 0 }));
    console_.apply(ev(1, "CardStarted", { card: "a" }));
    console_.apply(ev(2, "CardStarted", { card: "b" }));
    expect([...console_.running]).toEqual(["a", "b"]);
    console_.apply(ev(3, "CardSatisfied", { card: "a" }));
    console_.apply(ev(4, "CardTerminated", { card: "b" }));
    expect([...console_.running]).toEqual([]);
    expect(console_.satisfied.has("a")).toBe(true);
    console_.apply(ev(5, "HandStarted", { hand: 1, iteration: 0 }));
    expect(console_.satisfied.size).toBe(0);
  });

  it("ignores replayed duplicates by sequence number", () => {
    const console_ = new MissionConsole();
    const first = ev(0, "DeckStarted");
    console_.apply(first);
    console_.apply(first);
    console_.apply(ev(1, "HandStarted", { hand: 0, iteration: 0 }));
    console_.apply(ev(0, "DeckStarted"));
    expect(console_.events).toHaveLength(2);
  });

  it("collects telemetry into the drone track", () => {
    const console_ = new MissionConsole();
    console_.apply(ev(0, "Telemetry", { lat: 37.0, lon: -122.0, alt: 5, battery: 0.99 }));
    console_.apply(ev(1, "Telemetry", { lat: 37.001, lon: -122.0, alt: 9, battery: 0.98 }));
    expect(console_.track).toHaveLength(2);
    expect(console_.battery).toBe(0.98);
  });

  it("stop button arms, requests, and latches stopped", () => {
    const console_ = new MissionConsole();
    expect(console_.estopEnabled).toBe(true);
    console_.requestEstop();
    expect(console_.estop).toBe("requested");
    expect(console_.estopEnabled).toBe(false);
    console_.apply(ev(0, "EmergencyStop", { origin: "external", reason: "operator request" }));
    expect(console_.estop).toBe("stopped");
    console_.apply(ev(1, "DeckEnded", { status: "stopped" }));
    expect(console_.finished).toBe(true);
    expect(console_.estopEnabled).toBe(false);
  });
});
