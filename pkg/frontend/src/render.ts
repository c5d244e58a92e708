import { HelloFrame, StateFrame } from "./protocol.js";

// Draw list kept separate from the canvas so tests can assert on it.
export interface RectCommand {
  kind: "rect";
  x: number;
  y: number;
  w: number;
  h: number;
  fill: string;
}

export interface TextCommand {
  kind: "text";
  x: number;
  y: number;
  text: string;
  fill: string;
}

export type DrawCommand = RectCommand | TextCommand;

// One fixed color per tile id, stable across frames and sessions.
export const TILE_COLORS = [
  "#e8e4d8", // floor
  "#3d3a34", // wall
  "#4a90d9", // player
  "#e0b635", // key / crate
  "#9b59b6", // door / target
  "#d94f3d", // enemy
];

export function tileColor(tile: number): string {
  return TILE_COLORS[tile % TILE_COLORS.length];
}

export function gridCommands(grid: number[][], cellSize: number): RectCommand[] {
  const commands: RectCommand[] = [];
  for (let row = 0; row < grid.length; row++) {
    for (let col = 0; col < grid[row].length; col++) {
      commands.push({
        kind: "rect",
        x: col * cellSize,
        y: row * cellSize,
        w: cellSize,
        h: cellSize,
        fill: tileColor(grid[row][col]),
      });
    }
  }
  return commands;
}

export interface LegendEntry {
  name: string;
  color: string;
}

export function legendEntries(hello: HelloFrame): LegendEntry[] {
  return hello.alphabet.map((name, tile) => ({ name, color: tileColor(tile) }));
}

/** Direction indicator for a condition sign. */
export function arrowGlyph(sign: number): string {
  if (sign > 0) return "↑";
  if (sign < 0) return "↓";
  return "·";
}

export interface MetricRow {
  name: string;
  value: number;
  target: number | null;
  arrow: string | null;
}

/** Readout rows straight off a state frame; nothing is recomputed here. */
export function metricRows(state: StateFrame): MetricRow[] {
  return Object.keys(state.metrics).map((name) => ({
    name,
    value: state.metrics[name],
    target: name in state.goal ? state.goal[name] : null,
    arrow: name in state.condition ? arrowGlyph(state.condition[name]) : null,
  }));
}

const BADGES: Record<string, string> = {
  target_reached: "target reached",
  change_limit: "change limit",
  step_limit: "step limit",
};

/** Badge text for a finished episode, null while running. */
export function statusBadge(doneReason: string): string | null {
  return BADGES[doneReason] ?? null;
}

export function paint(
  ctx: CanvasRenderingContext2D,
  commands: DrawCommand[],
): void {
  for (const command of commands) {
    ctx.fillStyle = command.fill;
    if (command.kind === "rect") {
      ctx.fillRect(command.x, command.y, command.w, command.h);
    } else {
      ctx.fillText(command.text, command.x, command.y);
    }
  }
}
