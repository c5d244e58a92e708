import { SteerClient } from "./client.js";
import { heatmapLayout, parseSweepCsv, parseSweepJson } from "./heatmap.js";
import {
  gridCommands,
  legendEntries,
  metricRows,
  paint,
  statusBadge,
} from "./render.js";
import { HelloFrame, StateFrame } from "./protocol.js";

const CELL = 28;
const HEAT_CELL = 40;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function toast(text: string): void {
  const box = el<HTMLDivElement>("toast");
  box.textContent = text;
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 2500);
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("level");
  const ctx = canvas.getContext("2d")!;
  const sliders = el<HTMLDivElement>("sliders");
  const readouts = el<HTMLDivElement>("readouts");
  const legend = el<HTMLDivElement>("legend");
  const badge = el<HTMLDivElement>("badge");
  const status = el<HTMLDivElement>("status");
  const counters = el<HTMLDivElement>("counters");

  const url = `ws://${location.host}/ws`;
  const client = new SteerClient(url, {
    onStatus: (s) => {
      status.textContent = s;
      status.className = `status ${s}`;
    },
    onHello: (frame) => buildPanels(frame),
    onState: (frame) => drawState(frame),
    onServerError: (frame) => {
      toast(`${frame.code}: ${frame.detail}`);
      if (client.lastState) drawState(client.lastState);
    },
    onMalformed: () => toast("dropped a malformed frame"),
  });

  function buildPanels(hello: HelloFrame): void {
    legend.replaceChildren();
    for (const entry of legendEntries(hello)) {
      const item = document.createElement("span");
      item.className = "legend-entry";
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = entry.color;
      item.append(swatch, entry.name);
      legend.append(item);
    }

    sliders.replaceChildren();
    for (const [metric, [lo, hi]] of Object.entries(hello.bounds)) {
      const row = document.createElement("label");
      row.className = "slider-row";
      const title = document.createElement("span");
      title.textContent = metric;
      const value = document.createElement("output");
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(lo);
      input.max = String(hi);
      input.step = "1";
      input.addEventListener("input", () => {
        value.textContent = input.value;
        client.setTarget(metric, Number(input.value));
      });
      row.append(title, input, value);
      sliders.append(row);
    }
  }

  function drawState(frame: StateFrame): void {
    canvas.width = frame.grid[0].length * CELL;
    canvas.height = frame.grid.length * CELL;
    paint(ctx, gridCommands(frame.grid, CELL));

    readouts.replaceChildren();
    for (const row of metricRows(frame)) {
      const div = document.createElement("div");
      div.className = "readout";
      const goal = row.target === null ? "" : ` / ${row.target}`;
      const arrow = row.arrow === null ? "" : ` ${row.arrow}`;
      div.textContent = `${row.name}: ${row.value}${goal}${arrow}`;
      readouts.append(div);
    }
    counters.textContent = `steps ${frame.steps}  changes ${frame.changes}`;

    // keep sliders in line with the goal the server acknowledged
    for (const input of sliders.querySelectorAll("input")) {
      const metric = input.closest(".slider-row")?.querySelector("span")?.textContent;
      if (metric && metric in client.displayedGoal && document.activeElement !== input) {
        input.value = String(client.displayedGoal[metric]);
        const output = input.closest(".slider-row")?.querySelector("output");
        if (output) output.textContent = input.value;
      }
    }

    const text = statusBadge(frame.done_reason);
    badge.textContent = text ?? "";
    badge.className = text === null ? "badge" : "badge visible";
  }

  el<HTMLButtonElement>("pause").addEventListener("click", () => {
    if (client.paused) client.resume();
    else client.pause();
    el<HTMLButtonElement>("pause").textContent = client.paused ? "resume" : "pause";
  });
  el<HTMLButtonElement>("reset").addEventListener("click", () => client.reset());
  el<HTMLInputElement>("speed").addEventListener("change", (event) => {
    client.setSpeed(Number((event.target as HTMLInputElement).value));
  });

  const heatCanvas = el<HTMLCanvasElement>("heatmap");
  const heatCtx = heatCanvas.getContext("2d")!;
  const picker = el<HTMLInputElement>("sweep-file");
  const heatKind = el<HTMLSelectElement>("heat-kind");
  let sweepText: string | null = null;

  function drawHeatmap(): void {
    if (sweepText === null) return;
    try {
      const data = sweepText.trimStart().startsWith("{")
        ? parseSweepJson(sweepText)
        : parseSweepCsv(sweepText);
      const which = heatKind.value === "diversity" ? "diversity" : "progress";
      const layout = heatmapLayout(data, which, HEAT_CELL);
      heatCanvas.width = layout.cols * HEAT_CELL;
      heatCanvas.height = layout.rows * HEAT_CELL;
      heatCtx.clearRect(0, 0, heatCanvas.width, heatCanvas.height);
      paint(heatCtx, layout.commands);
      el<HTMLDivElement>("heat-axes").textContent =
        layout.yMetric === null
          ? `${layout.xMetric}: ${layout.xLabels.join(", ")}`
          : `x ${layout.xMetric} ${layout.xLabels.join(",")}  y ${layout.yMetric} ${layout.yLabels.join(",")}`;
    } catch (err) {
      toast(String(err));
    }
  }

  picker.addEventListener("change", async () => {
    const file = picker.files?.[0];
    if (!file) return;
    sweepText = await file.text();
    drawHeatmap();
  });
  heatKind.addEventListener("change", drawHeatmap);

  client.connect();
}

window.addEventListener("load", main);
