/** Session state: the pinned driving set, undo/redo history, and the last
 * service response. Pure data layer, no DOM. The request sent to the
 * service is always derived from this state, so what is displayed and what
 * is transmitted cannot drift apart. */

import type { DrivingValue, PredictRequest, PredictResponse, Stream } from "./types";

export function slotKey(position: number, stream: Stream): string {
  return `${position}:${stream}`;
}

export interface SessionSnapshot {
  pins: DrivingValue[];
}

export class SessionState {
  sentenceId: string | null = null;
  sentenceLength = 0;
  targetSpeaker = 0;
  styleId = 0;
  referenceActor: number | null = null;

  private pins = new Map<string, DrivingValue>();
  private undoStack: SessionSnapshot[] = [];
  private redoStack: SessionSnapshot[] = [];
  lastResponse: PredictResponse | null = null;

  selectSentence(id: string, length: number, styleId: number): void {
    this.sentenceId = id;
    this.sentenceLength = length;
    this.styleId = styleId;
    this.pins.clear();
    this.undoStack = [];
    this.redoStack = [];
    this.lastResponse = null;
    this.referenceActor = null;
  }

  pinCount(): number {
    return this.pins.size;
  }

  pinnedValues(): DrivingValue[] {
    return Array.from(this.pins.values());
  }

  pinnedAt(position: number, stream: Stream): DrivingValue | undefined {
    return this.pins.get(slotKey(position, stream));
  }

  private snapshot(): SessionSnapshot {
    return { pins: this.pinnedValues().map((p) => ({ ...p })) };
  }

  private restore(snap: SessionSnapshot): void {
    this.pins = new Map(snap.pins.map((p) => [slotKey(p.position, p.stream), { ...p }]));
  }

  /** Pin or re-pin one slot; re-pinning replaces the value. */
  pin(position: number, stream: Stream, value: number): void {
    if (position < 0 || position >= this.sentenceLength) {
      throw new Error(`position ${position} outside sentence of length ${this.sentenceLength}`);
    }
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
    this.pins.set(slotKey(position, stream), { position, stream, value });
  }

  unpin(position: number, stream: Stream): void {
    const key = slotKey(position, stream);
    if (!this.pins.has(key)) return;
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
    this.pins.delete(key);
  }

  reset(): void {
    if (this.pins.size === 0) return;
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
    this.pins.clear();
  }

  undo(): boolean {
    const snap = this.undoStack.pop();
    if (!snap) return false;
    this.redoStack.push(this.snapshot());
    this.restore(snap);
    return true;
  }

  redo(): boolean {
    const snap = this.redoStack.pop();
    if (!snap) return false;
    this.undoStack.push(this.snapshot());
    this.restore(snap);
    return true;
  }

  /** The request implied by current state; pins are sorted for stable wire
   * order (the service treats the bag as unordered). */
  toRequest(): PredictRequest {
    if (this.sentenceId === null) throw new Error("no sentence selected");
    const driving = this.pinnedValues().sort((a, b) =>
      a.position - b.position || a.stream.localeCompare(b.stream),
    );
    return {
      sentence_id: this.sentenceId,
      target_speaker: this.targetSpeaker,
      style_id: this.styleId,
      driving,
    };
  }

  acceptResponse(response: PredictResponse): void {
    this.lastResponse = response;
  }
}
