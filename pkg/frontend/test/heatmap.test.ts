import { describe, expect, test } from "vitest";
import {
  heatmapLayout,
  parseSweepCsv,
  parseSweepJson,
  valueColor,
} from "../src/heatmap.js";

const ONE_METRIC_CSV = `goal_regions,progress,diversity,episodes,already_satisfied
1,100.000000,0.250000,20,0
4,95.500000,,1,0
6,88.250000,0.312500,20,1
`;

const TWO_METRIC_CSV = `goal_regions,goal_path_length,progress,diversity,episodes,already_satisfied
1,10,90.000000,0.100000,20,0
1,20,80.000000,0.200000,20,0
4,10,70.000000,0.300000,20,0
4,20,60.000000,0.400000,20,0
`;

describe("parseSweepCsv", () => {
  test("reads goals, floats, empty diversity, and the satisfied flag", () => {
    const data = parseSweepCsv(ONE_METRIC_CSV);
    expect(data.metrics).toEqual(["regions"]);
    expect(data.cells).toHaveLength(3);
    expect(data.cells[0].goal).toEqual({ regions: 1 });
    expect(data.cells[0].progress).toBeCloseTo(100);
    expect(data.cells[1].diversity).toBeNull();
    expect(data.cells[2].alreadySatisfied).toBe(true);
    expect(data.cells[0].alreadySatisfied).toBe(false);
  });

  test("multi-metric headers split into goal columns", () => {
    const data = parseSweepCsv(TWO_METRIC_CSV);
    expect(data.metrics).toEqual(["regions", "path_length"]);
    expect(data.cells[3].goal).toEqual({ regions: 4, path_length: 20 });
  });

  test("rejects foreign headers", () => {
    expect(() => parseSweepCsv("a,b,c\n1,2,3\n")).toThrow(/header/);
    expect(() => parseSweepCsv("goal_x,progress\n")).toThrow(/data rows|header/);
  });
});

describe("parseSweepJson", () => {
  test("reads the report document shape", () => {
    const doc = {
      agent: "greedy",
      axes: { regions: [1, 4, 6] },
      cells: [
        {
          goal: { regions: 1 },
          progress: 97.5,
          diversity: null,
          episodes: 20,
          already_satisfied: false,
          samples: ["..\n.."],
        },
      ],
    };
    const data = parseSweepJson(JSON.stringify(doc));
    expect(data.metrics).toEqual(["regions"]);
    expect(data.cells[0].progress).toBeCloseTo(97.5);
    expect(data.cells[0].diversity).toBeNull();
  });

  test("rejects unrelated documents", () => {
    expect(() => parseSweepJson("{}")).toThrow(/not a sweep report/);
  });
});

describe("heatmapLayout", () => {
  test("single metric lays out one row", () => {
    const layout = heatmapLayout(parseSweepCsv(ONE_METRIC_CSV), "progress", 10);
    expect(layout.rows).toBe(1);
    expect(layout.cols).toBe(3);
    expect(layout.yMetric).toBeNull();
    expect(layout.xLabels).toEqual([1, 4, 6]);
    expect(layout.commands).toHaveLength(3);
  });

  test("two metrics lay out a matrix", () => {
    const layout = heatmapLayout(parseSweepCsv(TWO_METRIC_CSV), "progress", 10);
    expect(layout.rows).toBe(2);
    expect(layout.cols).toBe(2);
    expect(layout.yMetric).toBe("path_length");
    const cell = layout.commands.find((c) => c.kind === "rect" && c.x === 10 && c.y === 10);
    expect(cell).toBeDefined();
  });

  test("diversity view skips cells without a value", () => {
    const layout = heatmapLayout(parseSweepCsv(ONE_METRIC_CSV), "diversity", 10);
    expect(layout.commands).toHaveLength(2); // the single-episode cell is absent
  });

  test("higher values map to warmer colors", () => {
    const low = valueColor(0, 100);
    const high = valueColor(100, 100);
    expect(low).not.toBe(high);
    const parse = (c: string) => c.match(/\d+/g)!.map(Number);
    expect(parse(high)[0]).toBeGreaterThan(parse(low)[0]);
    expect(valueColor(250, 100)).toBe(valueColor(100, 100)); // clamped
  });
});
