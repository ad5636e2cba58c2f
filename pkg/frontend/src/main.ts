/**
 * Browser entry point: wires the palette, deck builder, and mission console
 * to the DOM. All state logic lives in the imported modules; this file only
 * renders and routes events.
 */
import { MissionApi } from "./api.js";
import { MissionConsole } from "./console.js";
import { DeckDraft } from "./deck.js";
import { fitViewport, project, toEnu, type EnuPoint } from "./map.js";
import { buildPalette, paletteGroups, type PaletteEntry } from "./palette.js";
import { readSse } from "./sse.js";
import type { DescriptorJson, DiagnosticJson, LiteralValue, TraceEventJson } from "./types.js";

const api = new MissionApi("");

const el = <T extends HTMLElement>(id: string): T => {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
};

let descriptors: DescriptorJson[] = [];
let draft: DeckDraft;
let diagnostics: DiagnosticJson[] = [];
let selectedHand = 0;
let consoleState = new MissionConsole();
let executionId: string | null = null;
let streamAbort: AbortController | null = null;

// ---------------------------------------------------------------------------
// Palette
// ---------------------------------------------------------------------------

function renderPalette(): void {
  const host = el<HTMLDivElement>("palette");
  host.innerHTML = "";
  const groups = paletteGroups(buildPalette(descriptors));
  for (const [group, entries] of groups) {
    const heading = document.createElement("h3");
    heading.textContent = group;
    host.appendChild(heading);
    for (const entry of entries) {
      host.appendChild(paletteCard(entry));
    }
  }
}

function paletteCard(entry: PaletteEntry): HTMLElement {
  const card = document.createElement("div");
  card.className = "palette-card" + (entry.playable ? "" : " static");
  card.style.borderLeftColor = entry.color;
  const badges = entry.tokenBadges
    .map((b) => `<span class="token ${b.consumed ? "consumed" : "shared"}">${b.type}</span>`)
    .join("");
  card.innerHTML = `<span class="name">${entry.name}</span>` +
    (entry.ends ? '<span class="ends">END</span>' : "") + badges;
  if (entry.playable) {
    card.title = "add to the selected hand";
    card.addEventListener("click", () => {
      draft.addCard(selectedHand, entry.path);
      syncDeck();
    });
  }
  return card;
}

// ---------------------------------------------------------------------------
// Deck builder
// ---------------------------------------------------------------------------

function diagnosticsFor(hand: number, card: string | null): DiagnosticJson[] {
  return diagnostics.filter((d) => d.path.hand === hand && d.path.card === card);
}

function renderDeck(): void {
  const host = el<HTMLDivElement>("deck");
  host.innerHTML = "";
  draft.hands.forEach((hand, index) => {
    const section = document.createElement("section");
    section.className = "hand" +
      (index === selectedHand ? " selected" : "") +
      (index === consoleState.currentHand ? " live" : "");
    const header = document.createElement("header");
    header.innerHTML = `<strong>Hand ${index + 1}</strong>` +
      ` <label>rule <select>${["all", "any"].map((r) =>
        `<option ${hand.rule === r ? "selected" : ""}>${r}</option>`).join("")}</select></label>` +
      ` <label>repeat +<input type="number" min="0" value="${hand.repeat}" /></label>` +
      ` <button class="del">delete hand</button>`;
    header.addEventListener("click", () => {
      selectedHand = index;
      renderDeck();
    });
    header.querySelector("select")!.addEventListener("change", (ev) => {
      draft.setRule(index, (ev.target as HTMLSelectElement).value as "all" | "any");
      syncDeck();
    });
    header.querySelector("input")!.addEventListener("change", (ev) => {
      draft.setRepeat(index, Number((ev.target as HTMLInputElement).value));
      syncDeck();
    });
    header.querySelector("button.del")!.addEventListener("click", (ev) => {
      ev.stopPropagation();
      draft.removeHand(index);
      selectedHand = Math.min(selectedHand, draft.hands.length - 1);
      syncDeck();
    });
    section.appendChild(header);

    for (const diag of diagnosticsFor(index, null)) {
      section.appendChild(diagnosticBadge(diag));
    }
    for (const card of hand.cards) {
      section.appendChild(renderCard(index, card.id));
    }
    hand.branches.forEach((branch, b) => {
      const row = document.createElement("div");
      row.className = "branch";
      row.textContent = `branch ${b + 1} -> hand ${branch.goto + 1} when ${JSON.stringify(branch.when)}`;
      const remove = document.createElement("button");
      remove.textContent = "x";
      remove.addEventListener("click", () => {
        draft.removeBranch(index, b);
        syncDeck();
      });
      row.appendChild(remove);
      section.appendChild(row);
    });
    host.appendChild(section);
  });

  const tokens = el<HTMLDivElement>("token-pool");
  tokens.innerHTML = "<h3>Token pool</h3>" + [...draft.tokens.entries()]
    .map(([id, type]) => `<span class="token shared">${id}:${type}</span>`).join(" ");
}

function renderCard(handIndex: number, cardId: string): HTMLElement {
  const found = draft.findCard(cardId)!;
  const descriptor = draft.descriptor(found.card.card);
  const box = document.createElement("div");
  box.className = "card";
  if (consoleState.running.has(cardId)) box.classList.add("running");
  if (consoleState.satisfied.has(cardId)) box.classList.add("satisfied");
  const name = descriptor.path.split("/").pop();
  box.innerHTML = `<strong>${name}</strong> <code>${cardId}</code>` +
    (descriptor.ends ? ' <span class="ends">END</span>' : "");

  for (const slot of descriptor.inputs) {
    const row = document.createElement("div");
    row.className = "slot";
    const bound = found.card.inputs[slot.name];
    const label = bound === undefined ? "(unbound)" : JSON.stringify(bound);
    row.innerHTML = `<em>${slot.name}: ${slot.kind}${slot.required ? "*" : ""}</em> ${label} `;
    const edit = document.createElement("button");
    edit.textContent = "set";
    edit.addEventListener("click", () => {
      const raw = window.prompt(`Literal JSON for ${slot.name} (${slot.kind})`, "0");
      if (raw === null) return;
      try {
        draft.stackInput(cardId, slot.name, JSON.parse(raw) as LiteralValue);
      } catch (error) {
        window.alert(`not valid JSON: ${error}`);
        return;
      }
      syncDeck();
    });
    row.appendChild(edit);
    box.appendChild(row);
  }

  for (const slot of descriptor.tokens) {
    const row = document.createElement("div");
    row.className = "slot";
    row.innerHTML = `<em>token ${slot.slot}</em> ${found.card.tokens[slot.slot]}` +
      `<span class="token ${slot.consumed ? "consumed" : "shared"}">${slot.type}</span>`;
    box.appendChild(row);
  }

  const branchButton = document.createElement("button");
  branchButton.textContent = "branch on completion…";
  branchButton.addEventListener("click", () => {
    const target = window.prompt("Jump to hand number when this card completes:", `${handIndex + 2}`);
    if (target === null) return;
    draft.addBranch(handIndex, [cardId], Number(target) - 1);
    syncDeck();
  });
  const remove = document.createElement("button");
  remove.textContent = "remove";
  remove.addEventListener("click", () => {
    draft.removeCard(cardId);
    syncDeck();
  });
  box.appendChild(branchButton);
  box.appendChild(remove);
  for (const diag of diagnosticsFor(handIndex, cardId)) {
    box.appendChild(diagnosticBadge(diag));
  }
  return box;
}

function diagnosticBadge(diag: DiagnosticJson): HTMLElement {
  const badge = document.createElement("div");
  badge.className = `diag ${diag.severity}`;
  badge.textContent = `${diag.code}: ${diag.message}`;
  return badge;
}

async function syncDeck(): Promise<void> {
  const body = draft.toJson();
  await api.saveDeck(body);
  diagnostics = await api.validate(body.deckId);
  renderDeck();
}

// ---------------------------------------------------------------------------
// Mission console
// ---------------------------------------------------------------------------

function renderConsole(): void {
  const timeline = el<HTMLOListElement>("timeline");
  timeline.innerHTML = "";
  for (const event of consoleState.events.slice(-200)) {
    const item = document.createElement("li");
    item.textContent = formatEvent(event);
    timeline.appendChild(item);
  }
  timeline.scrollTop = timeline.scrollHeight;

  const estop = el<HTMLButtonElement>("estop");
  estop.disabled = !consoleState.estopEnabled || executionId === null;
  el<HTMLSpanElement>("run-status").textContent = consoleState.status
    ?? (executionId ? "running" : "idle");
  drawMap();
  renderDeck(); // refresh live-hand highlight and card states
}

function formatEvent(event: TraceEventJson): string {
  const rest = Object.entries(event)
    .filter(([key]) => !["t", "seq", "event"].includes(key))
    .map(([key, value]) => `${key}=${JSON.stringify(value)}`)
    .join(" ");
  return `t=${event.t.toFixed(1)} ${event.event} ${rest}`;
}

function drawMap(): void {
  const canvas = el<HTMLCanvasElement>("map");
  const context = canvas.getContext("2d");
  if (!context) return;
  context.clearRect(0, 0, canvas.width, canvas.height);
  if (consoleState.track.length === 0) return;
  const origin = consoleState.track[0];
  const points: EnuPoint[] = consoleState.track.map((p) => toEnu(origin, p));
  const view = fitViewport(points, canvas.width, canvas.height);

  context.strokeStyle = "#1f6fb2";
  context.lineWidth = 2;
  context.beginPath();
  points.forEach((p, i) => {
    const { x, y } = project(view, p);
    if (i === 0) context.moveTo(x, y);
    else context.lineTo(x, y);
  });
  context.stroke();

  const last = project(view, points[points.length - 1]);
  context.fillStyle = consoleState.finished ? "#555" : "#c0392b";
  context.beginPath();
  context.arc(last.x, last.y, 6, 0, Math.PI * 2);
  context.fill();
  const altitude = consoleState.track[consoleState.track.length - 1].alt;
  context.fillStyle = "#222";
  context.fillText(`alt ${altitude.toFixed(1)} m` +
    (consoleState.battery !== null ? `  battery ${(consoleState.battery * 100).toFixed(0)}%` : ""),
    8, 14);
}

async function startRun(): Promise<void> {
  await syncDeck();
  if (diagnostics.some((d) => d.severity === "error")) {
    window.alert("fix the validation errors first");
    return;
  }
  consoleState = new MissionConsole();
  const { executionId: id } = await api.startExecution({
    deckId: draft.deckId,
    timeRatio: Number(el<HTMLInputElement>("time-ratio").value) || 10,
    telemetryEvery: 5,
  });
  executionId = id;
  streamAbort?.abort();
  streamAbort = new AbortController();
  renderConsole();
  try {
    for await (const message of readSse(api.eventsUrl(id), streamAbort.signal)) {
      consoleState.apply(JSON.parse(message.data) as TraceEventJson);
      renderConsole();
    }
  } catch (error) {
    if (!(error instanceof DOMException && error.name === "AbortError")) throw error;
  }
}

async function pressEstop(): Promise<void> {
  if (executionId === null) return;
  consoleState.requestEstop();
  renderConsole();
  await api.estop(executionId);
}

// ---------------------------------------------------------------------------
// Boot
// ---------------------------------------------------------------------------

async function boot(): Promise<void> {
  descriptors = await api.catalog();
  draft = new DeckDraft(el<HTMLInputElement>("deck-id").value || "console-deck", descriptors);
  renderPalette();
  await syncDeck();
  renderConsole();

  el<HTMLButtonElement>("add-hand").addEventListener("click", () => {
    selectedHand = draft.addHand();
    syncDeck();
  });
  el<HTMLInputElement>("deck-id").addEventListener("change", (ev) => {
    draft.deckId = (ev.target as HTMLInputElement).value || "console-deck";
    syncDeck();
  });
  el<HTMLInputElement>("repeat-deck").addEventListener("change", (ev) => {
    draft.repeatDeck = (ev.target as HTMLInputElement).checked;
    syncDeck();
  });
  el<HTMLButtonElement>("load-deck").addEventListener("click", async () => {
    const { decks } = await api.listDecks();
    const pick = window.prompt(`Load which deck?\n${decks.join(", ")}`);
    if (!pick) return;
    draft = DeckDraft.fromJson(await api.getDeck(pick), descriptors);
    el<HTMLInputElement>("deck-id").value = draft.deckId;
    selectedHand = 0;
    await syncDeck();
  });
  el<HTMLButtonElement>("run").addEventListener("click", () => void startRun());
  el<HTMLButtonElement>("estop").addEventListener("click", () => void pressEstop());
}

void boot();
