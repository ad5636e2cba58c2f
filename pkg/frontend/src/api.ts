/** Thin client for the mission service HTTP endpoints. */
import type {
  DeckJson,
  DescriptorJson,
  DiagnosticJson,
  ExecutionSummaryJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class MissionApi {
  constructor(public baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  catalog(): Promise<DescriptorJson[]> {
    return this.request("GET", "/catalog");
  }

  listDecks(): Promise<{ decks: string[] }> {
    return this.request("GET", "/decks");
  }

  saveDeck(deck: DeckJson): Promise<{ deckId: string }> {
    return this.request("POST", "/decks", deck);
  }

  getDeck(deckId: string): Promise<DeckJson> {
    return this.request("GET", `/decks/${deckId}`);
  }

  deleteDeck(deckId: string): Promise<void> {
    return this.request("DELETE", `/decks/${deckId}`);
  }

  validate(deckId: string): Promise<DiagnosticJson[]> {
    return this.request("POST", `/decks/${deckId}/validate`);
  }

  startExecution(body: {
    deckId: string;
    world?: unknown;
    timeRatio?: number;
    maxRepeats?: number;
    maxSimTime?: number;
    telemetryEvery?: number;
  }): Promise<{ executionId: string }> {
    return this.request("POST", "/executions", body);
  }

  executionSummary(executionId: string): Promise<ExecutionSummaryJson> {
    return this.request("GET", `/executions/${executionId}`);
  }

  estop(executionId: string): Promise<{ executionId: string; ack: string }> {
    return this.request("POST", `/executions/${executionId}/estop`);
  }

  eventsUrl(executionId: string, since?: number): string {
    const suffix = since === undefined ? "" : `?since=${since}`;
    return `${this.baseUrl}/executions/${executionId}/events${suffix}`;
  }
}
