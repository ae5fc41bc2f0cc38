import { describe, expect, it } from "vitest";

import { RequestScheduler } from "../src/scheduler";

interface FakeTimerEntry {
  fn: () => void;
  ms: number;
  cleared: boolean;
}

class FakeClock {
  timers: FakeTimerEntry[] = [];

  setTimer = (fn: () => void, ms: number): unknown => {
    const entry = { fn, ms, cleared: false };
    this.timers.push(entry);
    return entry;
  };

  clearTimer = (handle: unknown): void => {
    (handle as FakeTimerEntry).cleared = true;
  };

  fireLast(): void {
    const live = this.timers.filter((t) => !t.cleared);
    live[live.length - 1]?.fn();
  }
}

describe("RequestScheduler", () => {
  it("debounces a burst of edits into one request", async () => {
    const clock = new FakeClock();
    const sent: number[] = [];
    const sched = new RequestScheduler<number, number>({
      send: async (r) => { sent.push(r); return r; },
      onResponse: () => {},
      setTimer: clock.setTimer,
      clearTimer: clock.clearTimer,
    });
    sched.request(1);
    sched.request(2);
    sched.request(3);
    clock.fireLast();
    await Promise.resolve();
    expect(sent).toEqual([3]);
    expect(clock.timers[0].cleared).toBe(true);  // superseded by the burst
    expect(clock.timers[1].cleared).toBe(true);
    expect(clock.timers[0].ms).toBe(75);
  });

  it("drops stale responses when a newer one already rendered", async () => {
    const clock = new FakeClock();
    const resolvers: ((v: string) => void)[] = [];
    const rendered: string[] = [];
    const sched = new RequestScheduler<string, string>({
      send: () => new Promise<string>((resolve) => resolvers.push(resolve)),
      onResponse: (resp) => rendered.push(resp),
      setTimer: clock.setTimer,
      clearTimer: clock.clearTimer,
    });
    sched.request("a");
    clock.fireLast();
    sched.request("b");
    clock.fireLast();
    expect(resolvers).toHaveLength(2);
    resolvers[1]("response-b"); // newer request returns first
    await Promise.resolve();
    resolvers[0]("response-a"); // stale: must be dropped
    await Promise.resolve();
    expect(rendered).toEqual(["response-b"]);
  });

  it("reports errors only if no newer response has rendered", async () => {
    const clock = new FakeClock();
    const errors: unknown[] = [];
    const sched = new RequestScheduler<number, number>({
      send: async () => { throw new Error("boom"); },
      onResponse: () => {},
      onError: (e) => errors.push(e),
      setTimer: clock.setTimer,
      clearTimer: clock.clearTimer,
    });
    sched.request(1);
    clock.fireLast();
    await Promise.resolve();
    await Promise.resolve();
    expect(errors).toHaveLength(1);
  });

  it("flush sends immediately without waiting for the debounce window", async () => {
    const clock = new FakeClock();
    const sent: number[] = [];
    const sched = new RequestScheduler<number, number>({
      send: async (r) => { sent.push(r); return r; },
      onResponse: () => {},
      setTimer: clock.setTimer,
      clearTimer: clock.clearTimer,
    });
    sched.request(7);
    sched.flush();
    await Promise.resolve();
    expect(sent).toEqual([7]);
    sched.flush(); // nothing pending: no-op
    await Promise.resolve();
    expect(sent).toEqual([7]);
  });
});
