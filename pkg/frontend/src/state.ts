// Review-session view model.
//
// The server's decision log is the only truth: every mutation is expressed
// as a decision, applied optimistically, queued until the server
// acknowledges it, and replayable from scratch.  Reconstructing this state
// from the server's document response (which carries the acknowledged log)
// must land on exactly the same chip states as the live session.

import type {
  DecisionAction,
  DocumentResponse,
  SentencePayload,
  Suggestion,
} from "./api.js";

export type ChipState = "suggested" | "accepted" | "rejected" | "added";

export type PendingDecision = {
  idx: number;
  label: string;
  action: DecisionAction;
  attempts: number;
};

type SlotKey = `${number}:${string}`;

function key(idx: number, label: string): SlotKey {
  return `${idx}:${label}`;
}

export class ReviewState {
  readonly docId: string;
  readonly sentences: SentencePayload[];
  private suggested: Set<SlotKey> = new Set();
  private everAdded: Set<SlotKey> = new Set();
  private lastAction: Map<SlotKey, DecisionAction> = new Map();
  private pendingQueue: PendingDecision[] = [];

  constructor(doc: DocumentResponse) {
    this.docId = doc.doc_id;
    this.sentences = doc.sentences;
    for (const sentence of doc.sentences) {
      for (const s of sentence.suggestions) {
        if (s.suggested) {
          this.suggested.add(key(sentence.idx, s.label));
        }
      }
    }
    const log = doc.sentences
      .flatMap((s) => s.decisions)
      .sort((a, b) => a.seq - b.seq);
    for (const d of log) {
      this.applyAcknowledged(d.idx, d.label, d.action);
    }
  }

  isSuggested(idx: number, label: string): boolean {
    return this.suggested.has(key(idx, label));
  }

  /** Mirror of the server's validation rules. */
  canApply(idx: number, label: string, action: DecisionAction): boolean {
    if (idx < 0 || idx >= this.sentences.length) return false;
    const k = key(idx, label);
    if (action === "add") return !this.suggested.has(k);
    return this.suggested.has(k) || this.everAdded.has(k);
  }

  private applyAcknowledged(idx: number, label: string, action: DecisionAction): void {
    const k = key(idx, label);
    if (action === "add") this.everAdded.add(k);
    this.lastAction.set(k, action);
  }

  /** Optimistic local application; returns the queued decision. */
  apply(idx: number, label: string, action: DecisionAction): PendingDecision {
    if (!this.canApply(idx, label, action)) {
      throw new Error(`cannot ${action} ${label} on sentence ${idx}`);
    }
    this.applyAcknowledged(idx, label, action);
    const pending: PendingDecision = { idx, label, action, attempts: 0 };
    this.pendingQueue.push(pending);
    return pending;
  }

  acknowledge(pending: PendingDecision): void {
    this.pendingQueue = this.pendingQueue.filter((p) => p !== pending);
  }

  get pending(): readonly PendingDecision[] {
    return this.pendingQueue;
  }

  get dirty(): boolean {
    return this.pendingQueue.length > 0;
  }

  chipState(idx: number, label: string): ChipState {
    const k = key(idx, label);
    const last = this.lastAction.get(k);
    if (last === "reject") return "rejected";
    if (last === "add") return "added";
    if (last === "accept") return this.suggested.has(k) ? "accepted" : "added";
    return "suggested";
  }

  /** Labels a sentence would export right now: (suggested \\ rejected) u added. */
  visibleLabels(idx: number): string[] {
    const out = new Set<string>();
    for (const s of this.sentences[idx].suggestions) {
      if (s.suggested) out.add(s.label);
    }
    for (const [k, action] of this.lastAction) {
      const [i, label] = splitKey(k);
      if (i !== idx) continue;
      if (action === "reject") out.delete(label);
      else out.add(label);
    }
    return [...out].sort();
  }

  exportSets(): string[][] {
    return this.sentences.map((s) => this.visibleLabels(s.idx));
  }

  /** Chips to render, added labels appended after the server-sorted list. */
  chips(idx: number): { label: string; score: number | null; state: ChipState }[] {
    const sentence = this.sentences[idx];
    const fromScores = sentence.suggestions
      .filter((s) => s.suggested)
      .map((s: Suggestion) => ({
        label: s.label,
        score: s.score,
        state: this.chipState(idx, s.label),
      }));
    const added: { label: string; score: number | null; state: ChipState }[] = [];
    for (const [k, action] of this.lastAction) {
      const [i, label] = splitKey(k);
      if (i !== idx || this.suggested.has(k)) continue;
      if (action === "add" || action === "accept") {
        added.push({ label, score: null, state: this.chipState(idx, label) });
      }
    }
    added.sort((a, b) => a.label.localeCompare(b.label));
    return [...fromScores, ...added];
  }
}

function splitKey(k: SlotKey): [number, string] {
  const sep = k.indexOf(":");
  return [Number(k.slice(0, sep)), k.slice(sep + 1)];
}
