import { afterEach, beforeEach, describe, expect, test, vi } from "vitest";
import { SocketLike, SteerClient } from "../src/client.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  readyState = 0;
  onopen: (() => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;

  open() {
    this.readyState = 1;
    this.onopen?.();
  }

  receive(frame: unknown) {
    const data = typeof frame === "string" ? frame : JSON.stringify(frame);
    this.onmessage?.({ data });
  }

  drop() {
    this.readyState = 3;
    this.onclose?.();
  }

  send(data: string) {
    this.sent.push(data);
  }

  close() {
    this.drop();
  }

  targets(): Record<string, number>[] {
    return this.sent
      .map((raw) => JSON.parse(raw))
      .filter((f) => f.type === "set_targets")
      .map((f) => f.targets);
  }
}

const HELLO = {
  type: "hello",
  domain: "binary",
  bounds: { regions: [1, 8], path_length: [2, 20] },
  alphabet: ["floor", "wall"],
};

function stateFrame(goal: Record<string, number>) {
  return {
    type: "state",
    grid: [[0]],
    metrics: { regions: 2, path_length: 3 },
    goal,
    condition: { regions: 1 },
    steps: 0,
    changes: 0,
    done_reason: "running",
  };
}

function connected() {
  const sockets: FakeSocket[] = [];
  const client = new SteerClient("ws://test/ws", {}, () => {
    const socket = new FakeSocket();
    sockets.push(socket);
    return socket;
  });
  client.connect();
  sockets[0].open();
  sockets[0].receive(HELLO);
  sockets[0].receive(stateFrame({ regions: 4, path_length: 10 }));
  return { client, sockets };
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("goal handling", () => {
  test("adopts the server goal from state frames", () => {
    const { client } = connected();
    expect(client.displayedGoal).toEqual({ regions: 4, path_length: 10 });
    expect(client.acknowledgedGoal).toEqual({ regions: 4, path_length: 10 });
  });

  test("clamps targets into the hello bounds", () => {
    const { client, sockets } = connected();
    client.setTarget("regions", 99);
    expect(client.displayedGoal.regions).toBe(8);
    client.setTarget("regions", -7);
    vi.advanceTimersByTime(500);
    for (const targets of sockets[0].targets()) {
      expect(targets.regions).toBeGreaterThanOrEqual(1);
      expect(targets.regions).toBeLessThanOrEqual(8);
    }
  });

  test("slider at the bound sends exactly the bound value", () => {
    const { client, sockets } = connected();
    client.setTarget("regions", 8);
    vi.advanceTimersByTime(200);
    expect(sockets[0].targets()).toEqual([{ regions: 8 }]);
  });

  test("unknown metrics and pre-hello calls are ignored", () => {
    const sockets: FakeSocket[] = [];
    const client = new SteerClient("ws://test/ws", {}, () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
    client.connect();
    sockets[0].open();
    client.setTarget("regions", 5); // no hello yet
    sockets[0].receive(HELLO);
    client.setTarget("mystery", 5);
    vi.advanceTimersByTime(500);
    expect(sockets[0].targets()).toEqual([]);
  });

  test("a rejection snaps the display back to the acknowledged goal", () => {
    const { client, sockets } = connected();
    client.setTarget("regions", 7);
    expect(client.displayedGoal.regions).toBe(7);
    sockets[0].receive({ type: "error", code: "target_out_of_bounds", detail: "no" });
    expect(client.displayedGoal).toEqual({ regions: 4, path_length: 10 });
  });

  test("optimistic value survives a state frame until flushed", () => {
    const { client, sockets } = connected();
    client.setTarget("regions", 7); // sent immediately
    client.setTarget("regions", 6); // pending in the debounce window
    sockets[0].receive(stateFrame({ regions: 7, path_length: 10 }));
    expect(client.displayedGoal.regions).toBe(6);
    vi.advanceTimersByTime(200);
    sockets[0].receive(stateFrame({ regions: 6, path_length: 10 }));
    expect(client.displayedGoal.regions).toBe(6);
  });
});

describe("debounce", () => {
  test("rapid scrubbing stays at or under 10 frames per second", () => {
    const { client, sockets } = connected();
    const start = Date.now();
    const stamps: number[] = [];
    const realSend = sockets[0].send.bind(sockets[0]);
    sockets[0].send = (data: string) => {
      if (JSON.parse(data).type === "set_targets") stamps.push(Date.now() - start);
      realSend(data);
    };
    for (let tick = 0; tick < 400; tick++) {
      client.setTarget("regions", (tick % 8) + 1);
      vi.advanceTimersByTime(5); // 2 seconds of 200 Hz scrubbing
    }
    vi.advanceTimersByTime(200); // trailing flush
    expect(stamps.length).toBeGreaterThan(5);
    for (const windowStart of stamps) {
      const inWindow = stamps.filter((t) => t >= windowStart && t < windowStart + 1000);
      expect(inWindow.length).toBeLessThanOrEqual(10);
    }
    // the last value scrubbed is the one that sticks
    const targets = sockets[0].targets();
    expect(targets[targets.length - 1]).toEqual({ regions: 8 });
  });

  test("coalesces queued updates into one frame", () => {
    const { client, sockets } = connected();
    client.setTarget("regions", 5); // immediate
    client.setTarget("path_length", 12); // queued
    client.setTarget("regions", 6); // merged into the same queue
    vi.advanceTimersByTime(200);
    expect(sockets[0].targets()).toEqual([
      { regions: 5 },
      { path_length: 12, regions: 6 },
    ]);
  });
});

describe("connection lifecycle", () => {
  test("reconnects with exponential backoff", () => {
    const sockets: FakeSocket[] = [];
    const client = new SteerClient("ws://test/ws", {}, () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    });
    client.connect();
    sockets[0].open();
    sockets[0].drop();
    expect(sockets).toHaveLength(1);
    vi.advanceTimersByTime(1000);
    expect(sockets).toHaveLength(2);
    sockets[1].drop(); // never opened: backoff doubles
    vi.advanceTimersByTime(1999);
    expect(sockets).toHaveLength(2);
    vi.advanceTimersByTime(1);
    expect(sockets).toHaveLength(3);
  });

  test("a fresh hello resets the session state", () => {
    const { client, sockets } = connected();
    client.setTarget("regions", 7);
    sockets[0].drop();
    vi.advanceTimersByTime(1000);
    sockets[1].open();
    sockets[1].receive(HELLO);
    expect(client.lastState).toBeNull();
    expect(client.displayedGoal).toEqual({});
    sockets[1].receive(stateFrame({ regions: 2, path_length: 5 }));
    expect(client.displayedGoal).toEqual({ regions: 2, path_length: 5 });
  });

  test("user close stops the reconnect loop", () => {
    const { client, sockets } = connected();
    client.close();
    vi.advanceTimersByTime(60000);
    expect(sockets).toHaveLength(1);
  });

  test("control frames encode as the protocol expects", () => {
    const { client, sockets } = connected();
    client.pause();
    client.resume();
    client.reset(7);
    client.setSpeed(25);
    const kinds = sockets[0].sent.map((raw) => JSON.parse(raw));
    expect(kinds).toContainEqual({ type: "pause" });
    expect(kinds).toContainEqual({ type: "resume" });
    expect(kinds).toContainEqual({ type: "reset", seed: 7 });
    expect(kinds).toContainEqual({ type: "set_speed", ms: 25 });
  });

  test("malformed frames are dropped and reported", () => {
    const malformed: string[] = [];
    const sockets: FakeSocket[] = [];
    const client = new SteerClient(
      "ws://test/ws",
      { onMalformed: (raw) => malformed.push(raw) },
      () => {
        const s = new FakeSocket();
        sockets.push(s);
        return s;
      },
    );
    client.connect();
    sockets[0].open();
    sockets[0].receive("{broken");
    sockets[0].receive({ type: "state", grid: "nope" });
    expect(malformed).toHaveLength(2);
    expect(client.lastState).toBeNull();
  });
});
