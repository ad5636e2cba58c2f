/** Wire formats shared with the mission service. */

export interface TokenDeclJson {
  id: string;
  type: string;
}

export type LiteralValue =
  | number
  | string
  | boolean
  | LiteralValue[]
  | { [key: string]: LiteralValue };

export interface YieldRefJson {
  hand: number;
  card: string;
  name: string;
}

export type InputSourceJson = { literal: LiteralValue } | { yield: YieldRefJson };

export type CondJson =
  | { card: string }
  | { and: CondJson[] }
  | { or: CondJson[] }
  | { not: CondJson };

export interface BranchJson {
  when: CondJson;
  goto: number;
}

export interface CardJson {
  id: string;
  card: string;
  inputs: Record<string, InputSourceJson>;
  tokens: Record<string, string>;
}

export interface HandJson {
  rule: "all" | "any";
  repeat: number;
  cards: CardJson[];
  branches: BranchJson[];
}

export interface DeckJson {
  deckId: string;
  tokens: TokenDeclJson[];
  repeatDeck: boolean;
  implicitLand: boolean;
  hands: HandJson[];
}

export interface InputSlotJson {
  name: string;
  kind: string;
  required: boolean;
}

export interface TokenSlotJson {
  slot: string;
  type: string;
  consumed: boolean;
}

export interface DescriptorJson {
  path: string;
  class: "Action" | "Input" | "Hand" | "Deck" | "Token";
  subclass: "Movement" | "Tech" | "Think" | "Trigger" | null;
  ends: boolean;
  inputs: InputSlotJson[];
  tokens: TokenSlotJson[];
  yields: { name: string; kind: string }[];
  produces: string | null;
  tokenType: string | null;
}

export interface DiagnosticJson {
  code: string;
  severity: "error" | "warning";
  path: { hand: number; card: string | null; slot: string | null };
  message: string;
}

export interface TraceEventJson {
  t: number;
  seq: number;
  event: string;
  hand?: number;
  iteration?: number;
  card?: string;
  name?: string;
  value?: LiteralValue;
  target?: number;
  reason?: string;
  origin?: string;
  status?: string;
  lat?: number;
  lon?: number;
  alt?: number;
  battery?: number;
}

export interface ExecutionSummaryJson {
  executionId: string;
  deckId: string;
  state: "pending" | "running" | "completed" | "stopped" | "faulted";
  startedAt: number;
  eventCount: number;
  simTime: number;
}
