// Session protocol frames, mirroring the server side verbatim.

export interface HelloFrame {
  type: "hello";
  domain: string;
  bounds: Record<string, [number, number]>;
  alphabet: string[];
}

export interface StateFrame {
  type: "state";
  grid: number[][];
  metrics: Record<string, number>;
  goal: Record<string, number>;
  condition: Record<string, number>;
  steps: number;
  changes: number;
  done_reason: string;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  detail: string;
}

export type ServerFrame = HelloFrame | StateFrame | ErrorFrame;

export type ClientFrame =
  | { type: "set_targets"; targets: Record<string, number> }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset"; seed: number | null }
  | { type: "set_speed"; ms: number };

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function numberMap(value: unknown): value is Record<string, number> {
  return isRecord(value) && Object.values(value).every((v) => typeof v === "number");
}

function isGrid(value: unknown): value is number[][] {
  if (!Array.isArray(value) || value.length === 0) return false;
  const width = Array.isArray(value[0]) ? value[0].length : -1;
  if (width <= 0) return false;
  return value.every(
    (row) =>
      Array.isArray(row) &&
      row.length === width &&
      row.every((cell) => typeof cell === "number"),
  );
}

function isBounds(value: unknown): value is Record<string, [number, number]> {
  return (
    isRecord(value) &&
    Object.values(value).every(
      (pair) =>
        Array.isArray(pair) &&
        pair.length === 2 &&
        pair.every((v) => typeof v === "number"),
    )
  );
}

/** Parse one server frame; null means malformed (caller drops it). */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(data)) return null;

  if (data.type === "hello") {
    if (
      typeof data.domain === "string" &&
      isBounds(data.bounds) &&
      Array.isArray(data.alphabet) &&
      data.alphabet.length > 0 &&
      data.alphabet.every((t) => typeof t === "string")
    ) {
      return data as unknown as HelloFrame;
    }
    return null;
  }

  if (data.type === "state") {
    if (
      isGrid(data.grid) &&
      numberMap(data.metrics) &&
      numberMap(data.goal) &&
      numberMap(data.condition) &&
      typeof data.steps === "number" &&
      typeof data.changes === "number" &&
      typeof data.done_reason === "string"
    ) {
      return data as unknown as StateFrame;
    }
    return null;
  }

  if (data.type === "error") {
    if (typeof data.code === "string" && typeof data.detail === "string") {
      return data as unknown as ErrorFrame;
    }
    return null;
  }

  return null;
}

export function encodeClientFrame(frame: ClientFrame): string {
  return JSON.stringify(frame);
}
