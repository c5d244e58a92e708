import { DrawCommand, RectCommand } from "./render.js";

// Sweep report loading and heatmap layout, all client side.

export interface SweepCell {
  goal: Record<string, number>;
  progress: number;
  diversity: number | null;
  episodes: number;
  alreadySatisfied: boolean;
}

export interface SweepData {
  metrics: string[];
  cells: SweepCell[];
}

export function parseSweepCsv(text: string): SweepData {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new Error("sweep csv has no data rows");
  const header = lines[0].split(",");
  const tail = ["progress", "diversity", "episodes", "already_satisfied"];
  const metrics = header.slice(0, header.length - tail.length);
  if (
    metrics.length === 0 ||
    !metrics.every((h) => h.startsWith("goal_")) ||
    header.slice(metrics.length).join(",") !== tail.join(",")
  ) {
    throw new Error(`unexpected sweep csv header: ${lines[0]}`);
  }
  const names = metrics.map((h) => h.slice("goal_".length));
  const cells = lines.slice(1).map((line) => {
    const parts = line.split(",");
    if (parts.length !== header.length) {
      throw new Error(`sweep csv row has ${parts.length} fields, expected ${header.length}`);
    }
    const goal: Record<string, number> = {};
    names.forEach((name, i) => {
      goal[name] = Number(parts[i]);
    });
    const diversity = parts[names.length + 1];
    return {
      goal,
      progress: Number(parts[names.length]),
      diversity: diversity === "" ? null : Number(diversity),
      episodes: Number(parts[names.length + 2]),
      alreadySatisfied: parts[names.length + 3] === "1",
    };
  });
  return { metrics: names, cells };
}

export function parseSweepJson(text: string): SweepData {
  const doc = JSON.parse(text);
  if (!doc || typeof doc !== "object" || !Array.isArray(doc.cells)) {
    throw new Error("not a sweep report");
  }
  const metrics: string[] = Object.keys(doc.axes ?? {});
  const cells: SweepCell[] = doc.cells.map((cell: any) => ({
    goal: cell.goal,
    progress: cell.progress,
    diversity: cell.diversity ?? null,
    episodes: cell.episodes,
    alreadySatisfied: Boolean(cell.already_satisfied),
  }));
  return { metrics, cells };
}

/** Map a progress value in [0, 100] (or diversity in [0, 1]) to a color. */
export function valueColor(value: number, max: number): string {
  const t = Math.min(1, Math.max(0, value / max));
  // dark blue to warm yellow, readable on both ends
  const r = Math.round(30 + 225 * t);
  const g = Math.round(40 + 180 * t);
  const b = Math.round(90 - 60 * t);
  return `rgb(${r},${g},${b})`;
}

export interface HeatmapLayout {
  commands: DrawCommand[];
  rows: number;
  cols: number;
  xMetric: string;
  yMetric: string | null;
  xLabels: number[];
  yLabels: number[];
}

/**
 * Lay out cells on the first goal metric (x) and, if present, the second
 * (y). Reports with more than two controlled metrics average the extra
 * axes away. Cells missing a value (diversity with one episode) are
 * skipped.
 */
export function heatmapLayout(
  data: SweepData,
  which: "progress" | "diversity",
  cellSize: number,
): HeatmapLayout {
  const xMetric = data.metrics[0];
  const yMetric = data.metrics.length > 1 ? data.metrics[1] : null;
  const xLabels = [...new Set(data.cells.map((c) => c.goal[xMetric]))].sort(
    (a, b) => a - b,
  );
  const yLabels =
    yMetric === null
      ? [0]
      : [...new Set(data.cells.map((c) => c.goal[yMetric]))].sort((a, b) => a - b);

  const sums = new Map<string, { total: number; count: number }>();
  for (const cell of data.cells) {
    const value = which === "progress" ? cell.progress : cell.diversity;
    if (value === null) continue;
    const key = `${cell.goal[xMetric]}:${yMetric === null ? 0 : cell.goal[yMetric]}`;
    const entry = sums.get(key) ?? { total: 0, count: 0 };
    entry.total += value;
    entry.count += 1;
    sums.set(key, entry);
  }

  const max = which === "progress" ? 100 : 1;
  const commands: RectCommand[] = [];
  yLabels.forEach((y, rowIndex) => {
    xLabels.forEach((x, colIndex) => {
      const entry = sums.get(`${x}:${y}`);
      if (entry === undefined) return;
      commands.push({
        kind: "rect",
        x: colIndex * cellSize,
        y: rowIndex * cellSize,
        w: cellSize,
        h: cellSize,
        fill: valueColor(entry.total / entry.count, max),
      });
    });
  });

  return {
    commands,
    rows: yLabels.length,
    cols: xLabels.length,
    xMetric,
    yMetric,
    xLabels,
    yLabels,
  };
}
