import {
  ClientFrame,
  ErrorFrame,
  HelloFrame,
  StateFrame,
  encodeClientFrame,
  parseServerFrame,
} from "./protocol.js";

// Minimal surface of a WebSocket so tests can substitute a scripted fake.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  readyState: number;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHooks {
  onHello?: (frame: HelloFrame) => void;
  onState?: (frame: StateFrame) => void;
  onServerError?: (frame: ErrorFrame) => void;
  onMalformed?: (raw: string) => void;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
}

const OPEN = 1;
const MIN_SEND_GAP_MS = 100; // at most 10 set_targets frames per second
const MAX_BACKOFF_MS = 30000;

/**
 * One steering session: owns the socket, the reconnect loop, and the
 * goal state. Target updates clamp to the hello bounds, show
 * optimistically, and are debounced on the wire; a server rejection
 * snaps the display back to the last acknowledged goal.
 */
export class SteerClient {
  hello: HelloFrame | null = null;
  lastState: StateFrame | null = null;
  displayedGoal: Record<string, number> = {};
  acknowledgedGoal: Record<string, number> = {};
  paused = false;

  private socket: SocketLike | null = null;
  private reconnectAttempts = 0;
  private closedByUser = false;
  private lastSendAt = -Infinity;
  private pendingTargets: Record<string, number> | null = null;
  private flushTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private hooks: ClientHooks = {},
    private socketFactory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.hooks.onStatus?.("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectAttempts = 0;
      this.hooks.onStatus?.("open");
    };
    socket.onmessage = (event) => this.handleRaw(event.data);
    socket.onerror = () => {};
    socket.onclose = () => {
      this.hooks.onStatus?.("closed");
      if (!this.closedByUser) this.scheduleReconnect();
    };
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
  }

  private scheduleReconnect(): void {
    const delay = Math.min(1000 * 2 ** this.reconnectAttempts, MAX_BACKOFF_MS);
    this.reconnectAttempts += 1;
    setTimeout(() => {
      if (!this.closedByUser) this.connect();
    }, delay);
  }

  private handleRaw(raw: string): void {
    const frame = parseServerFrame(raw);
    if (frame === null) {
      this.hooks.onMalformed?.(raw);
      return;
    }
    if (frame.type === "hello") {
      // a fresh hello means a fresh server session: rebuild goal state
      this.hello = frame;
      this.lastState = null;
      this.displayedGoal = {};
      this.acknowledgedGoal = {};
      this.pendingTargets = null;
      this.hooks.onHello?.(frame);
      return;
    }
    if (frame.type === "state") {
      this.lastState = frame;
      this.acknowledgedGoal = { ...frame.goal };
      // adopt the server goal unless an optimistic edit is in flight
      if (this.pendingTargets === null) {
        this.displayedGoal = { ...frame.goal };
      }
      this.hooks.onState?.(frame);
      return;
    }
    if (frame.code === "target_out_of_bounds") {
      this.pendingTargets = null;
      this.displayedGoal = { ...this.acknowledgedGoal };
    }
    this.hooks.onServerError?.(frame);
  }

  /** Clamp into the hello bounds, update the display, queue the send. */
  setTarget(metric: string, value: number): void {
    if (this.hello === null) return;
    const bounds = this.hello.bounds[metric];
    if (bounds === undefined) return;
    const clamped = Math.min(bounds[1], Math.max(bounds[0], Math.round(value)));
    this.displayedGoal = { ...this.displayedGoal, [metric]: clamped };
    this.pendingTargets = { ...(this.pendingTargets ?? {}), [metric]: clamped };
    this.flushTargets();
  }

  private flushTargets(): void {
    if (this.pendingTargets === null || this.flushTimer !== null) return;
    const elapsed = Date.now() - this.lastSendAt;
    if (elapsed >= MIN_SEND_GAP_MS) {
      this.sendTargetsNow();
      return;
    }
    this.flushTimer = setTimeout(() => {
      this.flushTimer = null;
      this.sendTargetsNow();
    }, MIN_SEND_GAP_MS - elapsed);
  }

  private sendTargetsNow(): void {
    if (this.pendingTargets === null) return;
    const targets = this.pendingTargets;
    this.pendingTargets = null;
    this.send({ type: "set_targets", targets });
  }

  pause(): void {
    this.paused = true;
    this.send({ type: "pause" });
  }

  resume(): void {
    this.paused = false;
    this.send({ type: "resume" });
  }

  reset(seed: number | null = null): void {
    this.send({ type: "reset", seed });
  }

  setSpeed(ms: number): void {
    this.send({ type: "set_speed", ms: Math.max(1, Math.round(ms)) });
  }

  private send(frame: ClientFrame): void {
    if (this.socket === null || this.socket.readyState !== OPEN) return;
    if (frame.type === "set_targets") this.lastSendAt = Date.now();
    this.socket.send(encodeClientFrame(frame));
  }
}
