/**
 * Deck draft: the editable model behind the builder.
 *
 * Every edit keeps the draft schema-valid for the service deserializer
 * (forward-only branch targets, unique ids, complete token coverage); rule
 * violations that are merely semantic (dangling targets, missing inputs,
 * token conflicts) are left in place so the validator can report them at
 * their paths.
 */
import type {
  BranchJson,
  CardJson,
  CondJson,
  DeckJson,
  DescriptorJson,
  HandJson,
  InputSourceJson,
  LiteralValue,
} from "./types.js";

export class DeckDraft {
  deckId: string;
  tokens: Map<string, string> = new Map(); // id -> type
  repeatDeck = false;
  implicitLand = true;
  hands: HandJson[] = [];

  private counters: Map<string, number> = new Map();
  private catalog: Map<string, DescriptorJson>;

  constructor(deckId: string, descriptors: DescriptorJson[]) {
    this.deckId = deckId;
    this.catalog = new Map(descriptors.map((d) => [d.path, d]));
    this.addHand();
  }

  descriptor(path: string): DescriptorJson {
    const found = this.catalog.get(path);
    if (!found) throw new Error(`unknown card ${path}`);
    return found;
  }

  // -- hands ---------------------------------------------------------------

  addHand(): number {
    this.hands.push({ rule: "all", repeat: 0, cards: [], branches: [] });
    return this.hands.length - 1;
  }

  removeHand(index: number): void {
    if (this.hands.length <= 1) throw new Error("a deck needs at least one hand");
    this.hands.splice(index, 1);
    // Keep goto edges forward-only: targets past the removed hand shift
    // down; targets at it become dangling (out of range) so the validator
    // surfaces E_BRANCH_TARGET_UNKNOWN rather than silently rerouting.
    const dangling = this.hands.length + 1;
    this.hands.forEach((hand) => {
      hand.branches.forEach((branch) => {
        if (branch.goto > index) branch.goto -= 1;
        else if (branch.goto === index) branch.goto = dangling;
      });
    });
  }

  moveHand(from: number, to: number): void {
    if (from === to) return;
    const [hand] = this.hands.splice(from, 1);
    this.hands.splice(to, 0, hand);
    const mapping = (old: number): number => {
      if (old === from) return to;
      let adjusted = old;
      if (old > from) adjusted -= 1;
      if (adjusted >= to) adjusted += 1;
      return adjusted;
    };
    const dangling = this.hands.length + 1;
    this.hands.forEach((h, owner) => {
      h.branches.forEach((branch) => {
        if (branch.goto >= this.hands.length) return; // sentinel or dangling
        const next = mapping(branch.goto);
        branch.goto = next > owner ? next : dangling; // broken edges surface
      });
    });
  }

  setRule(index: number, rule: "all" | "any"): void {
    this.hands[index].rule = rule;
  }

  setRepeat(index: number, extra: number): void {
    if (extra < 0) throw new Error("repeat count cannot be negative");
    this.hands[index].repeat = Math.floor(extra);
  }

  // -- cards ---------------------------------------------------------------

  private freshId(path: string): string {
    const base = path.split("/").pop()!.toLowerCase();
    let n = this.counters.get(base) ?? 0;
    let id: string;
    do {
      n += 1;
      id = `${base}-${n}`;
    } while (this.findCard(id));
    this.counters.set(base, n);
    return id;
  }

  private ensureToken(tokenType: string): string {
    for (const [id, type] of this.tokens) {
      if (type === tokenType) return id;
    }
    this.tokens.set(tokenType, tokenType);
    return tokenType;
  }

  addCard(handIndex: number, path: string): CardJson {
    const descriptor = this.descriptor(path);
    if (descriptor.class !== "Action") {
      throw new Error(`${path} is a ${descriptor.class} card; only action cards join a hand`);
    }
    const tokens: Record<string, string> = {};
    for (const slot of descriptor.tokens) {
      tokens[slot.slot] = this.ensureToken(slot.type);
    }
    const card: CardJson = { id: this.freshId(path), card: path, inputs: {}, tokens };
    this.hands[handIndex].cards.push(card);
    return card;
  }

  findCard(cardId: string): { hand: number; card: CardJson } | null {
    for (let i = 0; i < this.hands.length; i++) {
      const card = this.hands[i].cards.find((c) => c.id === cardId);
      if (card) return { hand: i, card };
    }
    return null;
  }

  private mustFind(cardId: string): { hand: number; card: CardJson } {
    const found = this.findCard(cardId);
    if (!found) throw new Error(`no card ${cardId}`);
    return found;
  }

  removeCard(cardId: string): void {
    const { hand, card } = this.mustFind(cardId);
    const cards = this.hands[hand].cards;
    cards.splice(cards.indexOf(card), 1);
  }

  /** Stack an input value onto a card (drag an input card onto it). */
  stackInput(cardId: string, slot: string, value: LiteralValue): void {
    this.setInput(cardId, slot, { literal: value });
  }

  bindYield(cardId: string, slot: string, producerHand: number, producerCard: string,
            yieldName: string): void {
    this.setInput(cardId, slot, {
      yield: { hand: producerHand, card: producerCard, name: yieldName },
    });
  }

  private setInput(cardId: string, slot: string, source: InputSourceJson): void {
    const { card } = this.mustFind(cardId);
    const descriptor = this.descriptor(card.card);
    if (!descriptor.inputs.some((s) => s.name === slot)) {
      throw new Error(`${card.card} has no input slot ${slot}`);
    }
    card.inputs[slot] = source;
  }

  clearInput(cardId: string, slot: string): void {
    delete this.mustFind(cardId).card.inputs[slot];
  }

  bindToken(cardId: string, slot: string, tokenId: string): void {
    const { card } = this.mustFind(cardId);
    if (!(slot in card.tokens)) {
      throw new Error(`${card.card} has no token slot ${slot}`);
    }
    card.tokens[slot] = tokenId;
  }

  declareToken(id: string, type: string): void {
    this.tokens.set(id, type);
  }

  // -- branches ------------------------------------------------------------

  /** Add a branch arm: fires when every listed card has completed. */
  addBranch(handIndex: number, memberCardIds: string[], target: number): BranchJson {
    if (target <= handIndex) {
      throw new Error("branches only jump forward");
    }
    const leaves: CondJson[] = memberCardIds.map((card) => ({ card }));
    const when: CondJson = leaves.length === 1 ? leaves[0] : { and: leaves };
    const branch: BranchJson = { when, goto: target };
    this.hands[handIndex].branches.push(branch);
    return branch;
  }

  removeBranch(handIndex: number, branchIndex: number): void {
    this.hands[handIndex].branches.splice(branchIndex, 1);
  }

  // -- export --------------------------------------------------------------

  toJson(): DeckJson {
    return {
      deckId: this.deckId,
      tokens: [...this.tokens.entries()]
        .map(([id, type]) => ({ id, type }))
        .sort((a, b) => a.id.localeCompare(b.id)),
      repeatDeck: this.repeatDeck,
      implicitLand: this.implicitLand,
      hands: this.hands.map((hand) => ({
        rule: hand.rule,
        repeat: hand.repeat,
        cards: hand.cards.map((card) => ({
          id: card.id,
          card: card.card,
          inputs: { ...card.inputs },
          tokens: { ...card.tokens },
        })),
        branches: hand.branches.map((b) => ({ when: b.when, goto: b.goto })),
      })),
    };
  }

  static fromJson(json: DeckJson, descriptors: DescriptorJson[]): DeckDraft {
    const draft = new DeckDraft(json.deckId, descriptors);
    draft.hands = json.hands.map((hand) => ({
      rule: hand.rule,
      repeat: hand.repeat,
      cards: hand.cards.map((card) => ({ ...card, inputs: { ...card.inputs }, tokens: { ...card.tokens } })),
      branches: hand.branches.map((b) => ({ ...b })),
    }));
    draft.tokens = new Map(json.tokens.map((t) => [t.id, t.type]));
    draft.repeatDeck = json.repeatDeck;
    draft.implicitLand = json.implicitLand;
    return draft;
  }
}

/**
 * Structural self-check mirroring the service deserializer; used by tests
 * and as a belt-and-braces guard before POSTing.
 */
export function schemaProblems(deck: DeckJson): string[] {
  const problems: string[] = [];
  if (!deck.deckId) problems.push("deckId empty");
  if (deck.hands.length === 0) problems.push("no hands");
  const tokenIds = deck.tokens.map((t) => t.id);
  if (new Set(tokenIds).size !== tokenIds.length) problems.push("duplicate token ids");
  const seen = new Set<string>();
  deck.hands.forEach((hand, index) => {
    if (hand.repeat < 0) problems.push(`hands[${index}].repeat negative`);
    if (hand.rule !== "all" && hand.rule !== "any") problems.push(`hands[${index}].rule bad`);
    hand.cards.forEach((card) => {
      if (seen.has(card.id)) problems.push(`duplicate card id ${card.id}`);
      seen.add(card.id);
    });
    hand.branches.forEach((branch, b) => {
      if (branch.goto <= index) problems.push(`hands[${index}].branches[${b}] not forward`);
    });
  });
  return problems;
}
