import { describe, expect, it } from "vitest";

import { DeckDraft, schemaProblems } from "../src/deck.js";
import type { DescriptorJson } from "../src/types.js";

// Trimmed catalog mirroring the service's descriptor dump.
const DESCRIPTORS: DescriptorJson[] = [
  {
    path: "Action/Movement/FlyTo", class: "Action", subclass: "Movement", ends: true,
    inputs: [
      { name: "destination", kind: "Location", required: true },
      { name: "minAltitude", kind: "Altitude", required: false },
    ],
    tokens: [{ slot: "movement", type: "movement", consumed: true }],
    yields: [], produces: null, tokenType: null,
  },
  {
    path: "Action/Movement/Land", class: "Action", subclass: "Movement", ends: true,
    inputs: [{ name: "minAltitude", kind: "Altitude", required: false }],
    tokens: [{ slot: "movement", type: "movement", consumed: true }],
    yields: [], produces: null, tokenType: null,
  },
  {
    path: "Action/Tech/TakePhotos", class: "Action", subclass: "Tech", ends: true,
    inputs: [{ name: "duration", kind: "Duration", required: true }],
    tokens: [{ slot: "camera", type: "camera", consumed: true }],
    yields: [
      { name: "photos", kind: "SequenceOf(Image)" },
      { name: "locations", kind: "SequenceOf(Location)" },
    ],
    produces: null, tokenType: null,
  },
  {
    path: "Input/Location", class: "Input", subclass: null, ends: false,
    inputs: [], tokens: [], yields: [], produces: "Location", tokenType: null,
  },
];

function freshDraft(): DeckDraft {
  return new DeckDraft("test-deck", DESCRIPTORS);
}

describe("DeckDraft editing", () => {
  it("starts schema-valid with one empty hand", () => {
    const draft = freshDraft();
    expect(schemaProblems(draft.toJson())).toEqual([]);
    expect(draft.toJson().hands).toHaveLength(1);
  });

  it("adds cards with unique ids and auto token bindings", () => {
    const draft = freshDraft();
    const first = draft.addCard(0, "Action/Movement/FlyTo");
    draft.addHand();
    const second = draft.addCard(1, "Action/Movement/FlyTo");
    expect(first.id).not.toBe(second.id);
    expect(first.tokens).toEqual({ movement: "movement" });
    expect(draft.toJson().tokens).toEqual([{ id: "movement", type: "movement" }]);
    expect(schemaProblems(draft.toJson())).toEqual([]);
  });

  it("refuses non-action cards in hands", () => {
    const draft = freshDraft();
    expect(() => draft.addCard(0, "Input/Location")).toThrow(/Input/);
  });

  it("stacks literals and yield references onto slots", () => {
    const draft = freshDraft();
    const photos = draft.addCard(0, "Action/Tech/TakePhotos");
    draft.stackInput(photos.id, "duration", 12);
    const second = draft.addHand();
    const fly = draft.addCard(second, "Action/Movement/FlyTo");
    draft.bindYield(fly.id, "destination", 0, photos.id, "locations[0]");
    const json = draft.toJson();
    expect(json.hands[1].cards[0].inputs.destination).toEqual({
      yield: { hand: 0, card: photos.id, name: "locations[0]" },
    });
    expect(() => draft.stackInput(fly.id, "nope", 1)).toThrow(/no input slot/);
    expect(schemaProblems(json)).toEqual([]);
  });

  it("keeps branch targets forward when hands are removed", () => {
    const draft = freshDraft();
    const fly = draft.addCard(0, "Action/Movement/FlyTo");
    draft.addHand();
    draft.addHand();
    draft.addBranch(0, [fly.id], 2);
    draft.removeHand(1);
    const json = draft.toJson();
    // the target shifted down with the hand it pointed at
    expect(json.hands[0].branches[0].goto).toBe(1);
    expect(schemaProblems(json)).toEqual([]);
  });

  it("marks branches dangling when their target hand is deleted", () => {
    const draft = freshDraft();
    const fly = draft.addCard(0, "Action/Movement/FlyTo");
    draft.addHand();
    draft.addBranch(0, [fly.id], 1);
    draft.removeHand(1);
    const json = draft.toJson();
    // still schema-valid (forward), but out of range for the validator to flag
    expect(json.hands[0].branches[0].goto).toBeGreaterThan(json.hands.length);
    expect(schemaProblems(json)).toEqual([]);
  });

  it("rejects non-forward branch targets at edit time", () => {
    const draft = freshDraft();
    const fly = draft.addCard(0, "Action/Movement/FlyTo");
    expect(() => draft.addBranch(0, [fly.id], 0)).toThrow(/forward/);
  });

  it("reordering hands never produces a backward goto", () => {
    const draft = freshDraft();
    const a = draft.addCard(0, "Action/Movement/FlyTo");
    draft.addHand();
    draft.addHand();
    draft.addBranch(0, [a.id], 2);
    draft.moveHand(2, 0); // the branch's target moved before its owner
    const json = draft.toJson();
    expect(schemaProblems(json)).toEqual([]);
    json.hands.forEach((hand, index) => {
      hand.branches.forEach((branch) => expect(branch.goto).toBeGreaterThan(index));
    });
  });

  it("round-trips through JSON", () => {
    const draft = freshDraft();
    const photos = draft.addCard(0, "Action/Tech/TakePhotos");
    draft.stackInput(photos.id, "duration", 9);
    draft.repeatDeck = true;
    draft.setRule(0, "any");
    const clone = DeckDraft.fromJson(draft.toJson(), DESCRIPTORS);
    expect(clone.toJson()).toEqual(draft.toJson());
  });

  it("random edit sequences stay schema-valid", () => {
    let seed = 1234567;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const paths = ["Action/Movement/FlyTo", "Action/Movement/Land", "Action/Tech/TakePhotos"];
    for (let round = 0; round < 50; round++) {
      const draft = freshDraft();
      for (let step = 0; step < 30; step++) {
        const roll = rand();
        try {
          if (roll < 0.35) {
            draft.addCard(Math.floor(rand() * draft.hands.length),
                          paths[Math.floor(rand() * paths.length)]);
          } else if (roll < 0.5) {
            draft.addHand();
          } else if (roll < 0.6 && draft.hands.length > 1) {
            draft.removeHand(Math.floor(rand() * draft.hands.length));
          } else if (roll < 0.7) {
            const hand = Math.floor(rand() * draft.hands.length);
            const cards = draft.hands[hand].cards;
            if (cards.length > 0 && hand + 1 <= draft.hands.length) {
              draft.addBranch(hand, [cards[0].id],
                              hand + 1 + Math.floor(rand() * (draft.hands.length - hand)));
            }
          } else if (roll < 0.8 && draft.hands.length > 1) {
            draft.moveHand(Math.floor(rand() * draft.hands.length),
                           Math.floor(rand() * draft.hands.length));
          } else {
            const hand = Math.floor(rand() * draft.hands.length);
            const cards = draft.hands[hand].cards;
            if (cards.length > 0) draft.removeCard(cards[cards.length - 1].id);
          }
        } catch {
          // edits may be refused; the draft must stay consistent regardless
        }
        expect(schemaProblems(draft.toJson())).toEqual([]);
      }
    }
  });
});
