/** Canvas renderer: three horizontal tracks (f0, energy, duration) over the
 * sentence's phoneme slots. F0 and energy draw as line-connected points,
 * duration as per-phoneme bars. Pinned values render as green handles with
 * attention badges; an optional reference rendition overlays in grey. */

import { SessionState } from "./state";
import type { RenditionPayload, Stream } from "./types";
import { STREAMS } from "./types";

export interface TrackGeometry {
  width: number;
  trackHeight: number;
  gap: number;
  leftPad: number;
}

const DEFAULT_GEO: TrackGeometry = { width: 900, trackHeight: 150, gap: 26, leftPad: 56 };

const COLORS = {
  prediction: "#3571c9",
  pinned: "#1d9440",
  reference: "#9a9a9a",
  grid: "#e3e3e3",
  text: "#333333",
  badge: "#1d9440",
};

export interface TrackHit {
  position: number;
  stream: Stream;
  value: number; // denormalised display units implied by the y coordinate
}

export class TrackView {
  geo: TrackGeometry;
  private ranges: Record<Stream, [number, number]> = {
    f0: [80, 300],
    energy: [50, 75],
    duration: [0, 0.3],
  };

  constructor(
    private canvas: HTMLCanvasElement,
    private state: SessionState,
    geo: Partial<TrackGeometry> = {},
  ) {
    this.geo = { ...DEFAULT_GEO, ...geo };
  }

  private trackTop(streamIndex: number): number {
    return 10 + streamIndex * (this.geo.trackHeight + this.geo.gap);
  }

  totalHeight(): number {
    return this.trackTop(3);
  }

  private slotX(position: number): number {
    const t = Math.max(1, this.state.sentenceLength);
    const usable = this.geo.width - this.geo.leftPad - 16;
    return this.geo.leftPad + (usable * (position + 0.5)) / t;
  }

  private slotWidth(): number {
    const t = Math.max(1, this.state.sentenceLength);
    return (this.geo.width - this.geo.leftPad - 16) / t;
  }

  fitRanges(reference: RenditionPayload | null): void {
    if (!this.state.lastResponse && !reference) return;
    for (let s = 0; s < 3; s++) {
      const values: number[] = [];
      if (this.state.lastResponse) {
        for (const row of this.state.lastResponse.paf_denormalized) values.push(row[s]);
      }
      if (reference) {
        for (const row of reference.paf_denormalized) values.push(row[s]);
      }
      if (!values.length) continue;
      const lo = Math.min(...values);
      const hi = Math.max(...values);
      const pad = Math.max(1e-6, (hi - lo) * 0.15);
      this.ranges[STREAMS[s]] = [lo - pad, hi + pad];
    }
  }

  valueToY(stream: Stream, value: number): number {
    const [lo, hi] = this.ranges[stream];
    const s = STREAMS.indexOf(stream);
    const top = this.trackTop(s);
    const frac = (value - lo) / (hi - lo);
    return top + this.geo.trackHeight * (1 - Math.min(1, Math.max(0, frac)));
  }

  yToValue(stream: Stream, y: number): number {
    const [lo, hi] = this.ranges[stream];
    const s = STREAMS.indexOf(stream);
    const top = this.trackTop(s);
    const frac = 1 - (y - top) / this.geo.trackHeight;
    return lo + (hi - lo) * Math.min(1, Math.max(0, frac));
  }

  /** Map a click to (position, stream, display-unit value), or null when
   * outside every track. */
  hitTest(x: number, y: number): TrackHit | null {
    if (this.state.sentenceLength === 0) return null;
    for (let s = 0; s < 3; s++) {
      const top = this.trackTop(s);
      if (y < top || y > top + this.geo.trackHeight) continue;
      const usable = this.geo.width - this.geo.leftPad - 16;
      const frac = (x - this.geo.leftPad) / usable;
      if (frac < 0 || frac > 1) return null;
      const position = Math.min(
        this.state.sentenceLength - 1,
        Math.max(0, Math.floor(frac * this.state.sentenceLength)),
      );
      const stream = STREAMS[s];
      return { position, stream, value: this.yToValue(stream, y) };
    }
    return null;
  }

  render(
    reference: RenditionPayload | null,
    attention: Map<string, number>,
    pinToDisplay: (stream: Stream, normalized: number) => number = (_, v) => v,
  ): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    this.fitRanges(reference);
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    const t = this.state.sentenceLength;
    for (let s = 0; s < 3; s++) {
      const stream = STREAMS[s];
      const top = this.trackTop(s);
      ctx.fillStyle = COLORS.text;
      ctx.font = "13px sans-serif";
      ctx.fillText(stream, 8, top + 14);
      ctx.strokeStyle = COLORS.grid;
      ctx.strokeRect(this.geo.leftPad, top, this.geo.width - this.geo.leftPad - 16,
        this.geo.trackHeight);

      if (reference) {
        this.drawSeries(ctx, reference.paf_denormalized, s, COLORS.reference, stream === "duration");
      }
      if (this.state.lastResponse) {
        this.drawSeries(ctx, this.state.lastResponse.paf_denormalized, s, COLORS.prediction,
          stream === "duration");
      }
      // pinned markers, visually distinct, with attention badges
      for (let pos = 0; pos < t; pos++) {
        const pin = this.state.pinnedAt(pos, stream);
        if (!pin) continue;
        const x = this.slotX(pos);
        const y = this.valueToY(stream, pinToDisplay(stream, pin.value));
        ctx.fillStyle = COLORS.pinned;
        ctx.beginPath();
        ctx.arc(x, y, 6, 0, 2 * Math.PI);
        ctx.fill();
        ctx.strokeStyle = "#ffffff";
        ctx.stroke();
        const w = attention.get(`${pos}:${stream}`);
        if (w !== undefined) {
          ctx.fillStyle = COLORS.badge;
          ctx.font = "11px sans-serif";
          ctx.fillText(w.toFixed(2), x + 8, y - 8);
        }
      }
    }
  }

  private drawSeries(
    ctx: CanvasRenderingContext2D,
    rows: number[][],
    s: number,
    color: string,
    asBars: boolean,
  ): void {
    const stream = STREAMS[s];
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    if (asBars) {
      const w = this.slotWidth() * 0.72;
      const base = this.trackTop(s) + this.geo.trackHeight;
      for (let pos = 0; pos < rows.length; pos++) {
        const y = this.valueToY(stream, rows[pos][s]);
        ctx.globalAlpha = color === COLORS.reference ? 0.35 : 0.6;
        ctx.fillRect(this.slotX(pos) - w / 2, y, w, base - y);
        ctx.globalAlpha = 1;
      }
      return;
    }
    ctx.beginPath();
    for (let pos = 0; pos < rows.length; pos++) {
      const x = this.slotX(pos);
      const y = this.valueToY(stream, rows[pos][s]);
      if (pos === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
    for (let pos = 0; pos < rows.length; pos++) {
      ctx.beginPath();
      ctx.arc(this.slotX(pos), this.valueToY(stream, rows[pos][s]), 2.5, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
