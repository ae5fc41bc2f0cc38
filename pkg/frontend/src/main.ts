/** Wiring: selectors, canvas interaction, prediction round trips.
 *
 * Pinning happens in display units and is converted to normalised units
 * with the target speaker's stats before hitting the wire; responses render
 * immediately unless a newer request has already been dispatched.
 */

import { ApiClient } from "./api";
import { rmse } from "./rmse";
import { RequestScheduler } from "./scheduler";
import { SessionState, slotKey } from "./state";
import { TrackView } from "./tracks";
import type {
  PredictRequest, PredictResponse, RenditionPayload, SentenceDetail, SpeakerInfo, Stream,
} from "./types";

const api = new ApiClient("");
const state = new SessionState();

let detail: SentenceDetail | null = null;
let speakers: SpeakerInfo[] = [];
let reference: RenditionPayload | null = null;
let attention = new Map<string, number>();
let view: TrackView;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string | null): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
}

function speakerStats(id: number): SpeakerInfo | undefined {
  return speakers.find((s) => s.id === id);
}

function toNormalized(stream: Stream, displayValue: number): number {
  const spk = speakerStats(state.targetSpeaker);
  if (!spk) return displayValue;
  const { mean, std } = spk.stats[stream];
  return (displayValue - mean) / std;
}

function toDisplay(stream: Stream, normalized: number): number {
  const spk = speakerStats(state.targetSpeaker);
  if (!spk) return normalized;
  const { mean, std } = spk.stats[stream];
  return normalized * std + mean;
}

const scheduler = new RequestScheduler<PredictRequest, PredictResponse>({
  send: (request) => api.predict(request),
  onResponse: (response, request) => {
    state.acceptResponse(response);
    attention = new Map();
    request.driving.forEach((dv, i) => {
      attention.set(slotKey(dv.position, dv.stream), response.attention_weights[i]);
    });
    banner(null);
    redraw();
  },
  onError: (error) => {
    banner(`prediction failed: ${String(error)} (showing previous result)`);
  },
});

function requestPrediction(): void {
  if (state.sentenceId === null) return;
  scheduler.request(state.toRequest());
}

function redraw(): void {
  view.render(reference, attention, toDisplay);
  el<HTMLSpanElement>("pin-count").textContent = String(state.pinCount());
  const badgeSum = [...attention.values()].reduce((a, b) => a + b, 0);
  el<HTMLSpanElement>("badge-sum").textContent =
    attention.size ? badgeSum.toFixed(2) : "-";
  const readout = el<HTMLSpanElement>("rmse-readout");
  if (reference && state.lastResponse) {
    readout.textContent = rmse(state.lastResponse.paf_normalized,
      reference.paf_normalized).toFixed(4);
  } else {
    readout.textContent = "-";
  }
}

async function loadSentence(id: string): Promise<void> {
  detail = await api.sentence(id);
  state.selectSentence(detail.sentence_id, detail.length, detail.style_id);
  el<HTMLSelectElement>("style-select").value = String(detail.style_id);
  state.styleId = detail.style_id;
  reference = null;
  attention = new Map();
  const refSelect = el<HTMLSelectElement>("reference-select");
  refSelect.innerHTML = "<option value=''>off</option>" + detail.renditions
    .map((r) => `<option value="${r.actor_id}">actor ${r.actor_id}</option>`)
    .join("");
  requestPrediction();
  scheduler.flush();
}

function wireControls(): void {
  const sentenceSelect = el<HTMLSelectElement>("sentence-select");
  sentenceSelect.addEventListener("change", () => {
    loadSentence(sentenceSelect.value).catch((e) => banner(String(e)));
  });
  const speakerSelect = el<HTMLSelectElement>("speaker-select");
  speakerSelect.addEventListener("change", () => {
    state.targetSpeaker = Number(speakerSelect.value);
    requestPrediction();
  });
  const styleSelect = el<HTMLSelectElement>("style-select");
  styleSelect.addEventListener("change", () => {
    state.styleId = Number(styleSelect.value);
    requestPrediction();
  });
  const refSelect = el<HTMLSelectElement>("reference-select");
  refSelect.addEventListener("change", () => {
    const value = refSelect.value;
    reference = value === "" ? null :
      detail?.renditions.find((r) => r.actor_id === Number(value)) ?? null;
    state.referenceActor = value === "" ? null : Number(value);
    redraw();
  });

  el<HTMLButtonElement>("undo-btn").addEventListener("click", () => {
    if (state.undo()) requestPrediction();
    redraw();
  });
  el<HTMLButtonElement>("redo-btn").addEventListener("click", () => {
    if (state.redo()) requestPrediction();
    redraw();
  });
  el<HTMLButtonElement>("reset-btn").addEventListener("click", () => {
    state.reset();
    requestPrediction();
    redraw();
  });

  const canvas = el<HTMLCanvasElement>("tracks");
  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const hit = view.hitTest(ev.clientX - rect.left, ev.clientY - rect.top);
    if (!hit) return;
    if (ev.shiftKey) {
      state.unpin(hit.position, hit.stream);
    } else {
      state.pin(hit.position, hit.stream, toNormalized(hit.stream, hit.value));
    }
    requestPrediction();
    redraw();
  });
}

async function boot(): Promise<void> {
  const [sentences, spk, styles, health] = await Promise.all([
    api.sentences(), api.speakers(), api.styles(), api.health(),
  ]);
  speakers = spk;
  el<HTMLSpanElement>("fingerprint").textContent =
    `${health.family} @ ${health.fingerprint}`;

  const sentenceSelect = el<HTMLSelectElement>("sentence-select");
  sentenceSelect.innerHTML = sentences
    .filter((s) => s.split === "test")
    .concat(sentences.filter((s) => s.split !== "test"))
    .map((s) => `<option value="${s.sentence_id}">${s.sentence_id} (T=${s.length}, ${s.split})</option>`)
    .join("");
  el<HTMLSelectElement>("speaker-select").innerHTML = speakers
    .map((s) => `<option value="${s.id}">speaker ${s.id}</option>`)
    .join("");
  el<HTMLSelectElement>("style-select").innerHTML = styles
    .map((s) => `<option value="${s.id}">style ${s.id}</option>`)
    .join("");

  const canvas = el<HTMLCanvasElement>("tracks");
  view = new TrackView(canvas, state);
  canvas.width = view.geo.width;
  canvas.height = view.totalHeight();

  wireControls();
  state.targetSpeaker = speakers[0]?.id ?? 0;
  if (sentenceSelect.value) await loadSentence(sentenceSelect.value);
}

boot().catch((e) => banner(`failed to load: ${String(e)}`));
