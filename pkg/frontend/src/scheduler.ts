/** Debounced prediction dispatch with stale-response discarding.
 *
 * Edits arrive faster than predictions return; requests are debounced
 * (75 ms) and every dispatch carries a sequence number so that a response
 * overtaken by a newer request is dropped instead of rendered. */

export interface SchedulerOptions<Req, Resp> {
  send: (request: Req) => Promise<Resp>;
  onResponse: (response: Resp, request: Req) => void;
  onError?: (error: unknown) => void;
  debounceMs?: number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

export class RequestScheduler<Req, Resp> {
  private seq = 0;
  private delivered = 0;
  private timer: unknown = null;
  private pendingRequest: Req | null = null;
  private readonly debounceMs: number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;
  inFlight = 0;

  constructor(private readonly options: SchedulerOptions<Req, Resp>) {
    this.debounceMs = options.debounceMs ?? 75;
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = options.clearTimer ?? ((h) => clearTimeout(h as number));
  }

  /** Queue a request; earlier queued-but-unsent requests are superseded. */
  request(request: Req): void {
    this.pendingRequest = request;
    if (this.timer !== null) this.clearTimer(this.timer);
    this.timer = this.setTimer(() => this.flush(), this.debounceMs);
  }

  /** Send immediately, bypassing the debounce window. */
  flush(): void {
    if (this.timer !== null) {
      this.clearTimer(this.timer);
      this.timer = null;
    }
    const request = this.pendingRequest;
    if (request === null) return;
    this.pendingRequest = null;
    const ticket = ++this.seq;
    this.inFlight += 1;
    this.options
      .send(request)
      .then((response) => {
        if (ticket > this.delivered) {
          this.delivered = ticket;
          this.options.onResponse(response, request);
        } // older than an already-delivered response: stale, dropped
      })
      .catch((error) => {
        if (ticket > this.delivered && this.options.onError) {
          this.options.onError(error);
        }
      })
      .finally(() => {
        this.inFlight -= 1;
      });
  }
}
