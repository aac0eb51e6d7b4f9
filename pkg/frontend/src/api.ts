// Thin REST client for the chat backend.

import type { DatasetInfo, TurnResult } from "./types";

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) throw new Error(`HTTP ${resp.status}`);
  return (await resp.json()) as T;
}

export class Api {
  constructor(private base: string = "") {}

  async createSession(): Promise<string> {
    const body = await asJson<{ session_id: string }>(
      await fetch(`${this.base}/api/sessions`, { method: "POST" }),
    );
    return body.session_id;
  }

  async sendMessage(sessionId: string, text: string): Promise<TurnResult> {
    return asJson(
      await fetch(`${this.base}/api/sessions/${sessionId}/messages`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      }),
    );
  }

  async dataset(): Promise<DatasetInfo> {
    return asJson(await fetch(`${this.base}/api/dataset`));
  }

  async toggleColumn(name: string, supported: boolean): Promise<void> {
    await asJson(
      await fetch(`${this.base}/api/dataset/columns/${encodeURIComponent(name)}`, {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ supported }),
      }),
    );
  }

  async conditions(sessionId: string): Promise<Record<string, unknown>> {
    const body = await asJson<{ conditions: Record<string, unknown> }>(
      await fetch(`${this.base}/api/sessions/${sessionId}/conditions`),
    );
    return body.conditions;
  }

  async putCondition(
    sessionId: string,
    column: string,
    value: unknown,
  ): Promise<Record<string, unknown>> {
    const resp = await fetch(`${this.base}/api/sessions/${sessionId}/conditions`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ column, value }),
    });
    if (!resp.ok) {
      const detail = await resp.json().catch(() => ({ detail: `HTTP ${resp.status}` }));
      throw new Error(String((detail as { detail?: string }).detail ?? `HTTP ${resp.status}`));
    }
    const body = (await resp.json()) as { conditions: Record<string, unknown> };
    return body.conditions;
  }

  async removeCondition(sessionId: string, column: string): Promise<Record<string, unknown>> {
    const body = await asJson<{ conditions: Record<string, unknown> }>(
      await fetch(
        `${this.base}/api/sessions/${sessionId}/conditions/${encodeURIComponent(column)}`,
        { method: "DELETE" },
      ),
    );
    return body.conditions;
  }

  async sampleQuestions(sessionId: string): Promise<string[]> {
    const body = await asJson<{ questions: string[] }>(
      await fetch(`${this.base}/api/sessions/${sessionId}/sample-questions`),
    );
    return body.questions;
  }

  transcriptUrl(sessionId: string): string {
    return `${this.base}/api/sessions/${sessionId}/transcript?format=html`;
  }
}
