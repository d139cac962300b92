/**
 * The five figure renderers.  Each consumes one of the simulator's CSV
 * schemas and produces an SVG string plus a metadata record describing
 * the rendered series, for downstream tooling and tests.
 */

import {
  IdleRow,
  SweepRow,
  SchemaError,
  parseIdleCsv,
  parseSweepCsv,
} from "./csv.js";
import {
  HATCH_DEF,
  LinearScale,
  SvgBuilder,
  linearScale,
  logScale,
} from "./svg.js";

export const FIGURE_KINDS = [
  "round_breakdown", "shard_sweep", "cost_breakdown", "tradeoff", "cross_arch",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureMeta {
  kind: FigureKind;
  series: string[];
  bars: number;
  points: number;
  annotations: string[];
  infeasible: string[];
  notes: string[];
}

export interface RenderedFigure {
  svg: string;
  meta: FigureMeta;
}

const READ_COLOR = "#4878cf";
const COMPUTE_COLOR = "#ee854a";
const WRITE_COLOR = "#6acc65";
const LAMBDA_COLOR = "#956cb4";
const S3_COLOR = "#d65f5f";
const TOPOLOGY_COLORS: Record<string, string> = {
  gradsharding: "#4878cf",
  lambdafl: "#ee854a",
  lifl: "#6acc65",
};

const WIDTH = 760;
const HEIGHT = 420;
const MARGIN = { top: 48, right: 30, bottom: 64, left: 72 };

function plotArea() {
  return {
    x0: MARGIN.left,
    x1: WIDTH - MARGIN.right,
    y0: HEIGHT - MARGIN.bottom,
    y1: MARGIN.top,
    w: WIDTH - MARGIN.left - MARGIN.right,
    h: HEIGHT - MARGIN.top - MARGIN.bottom,
  };
}

function drawAxis(svg: SvgBuilder, scale: LinearScale, x0: number, x1: number,
                  label: string, format: (v: number) => string): void {
  svg.line(x0, scale(scale.ticks[0] ?? 0), x0, scale(scale.ticks[scale.ticks.length - 1] ?? 1));
  for (const tick of scale.ticks) {
    const y = scale(tick);
    svg.line(x0 - 4, y, x0, y);
    svg.line(x0, y, x1, y, "#e5e5e5");
    svg.text(x0 - 8, y + 4, format(tick), { anchor: "end", size: 10 });
  }
  svg.text(16, (scale(scale.ticks[0] ?? 0) + scale(scale.ticks[scale.ticks.length - 1] ?? 1)) / 2,
           label, { anchor: "middle", rotate: -90, size: 12 });
}

function legend(svg: SvgBuilder, entries: Array<[string, string, boolean?]>,
                x: number, y: number): void {
  let cursor = x;
  for (const [name, color, hatched] of entries) {
    svg.rect(cursor, y - 9, 12, 12, hatched ? "url(#hatch)" : color,
             'stroke="#999" stroke-width="0.5"');
    svg.text(cursor + 16, y + 1, name, { size: 11 });
    cursor += 16 + name.length * 6.4 + 18;
  }
}

function shortNumber(value: number): string {
  if (value >= 1000) return value.toFixed(0);
  if (value >= 10) return Number(value.toFixed(1)).toString();
  return Number(value.toPrecision(3)).toString();
}

function requireFeasibleTimings(row: SweepRow): asserts row is SweepRow & {
  s3ReadS: number; computeS: number; s3WriteS: number;
} {
  if (row.s3ReadS === null || row.computeS === null || row.s3WriteS === null) {
    throw new SchemaError(
      `row for ${row.topology}/${row.model} is marked feasible but has empty timings`);
  }
}

// -- round_breakdown ---------------------------------------------------------

export function renderRoundBreakdown(rows: IdleRow[]): RenderedFigure {
  if (rows.length === 0) throw new SchemaError("idle table has no rows");
  const svg = new SvgBuilder(WIDTH, HEIGHT);
  const area = plotArea();
  const maxTotal = Math.max(...rows.map((r) => (r.tTrainMs + r.tAggMs) / 1000));
  const scale = linearScale(maxTotal, area.h, area.y0);

  const slot = area.w / rows.length;
  const barWidth = Math.min(64, slot * 0.55);
  const annotations: string[] = [];
  rows.forEach((row, i) => {
    const x = area.x0 + slot * (i + 0.5) - barWidth / 2;
    const trainS = row.tTrainMs / 1000;
    const aggS = row.tAggMs / 1000;
    const yTrain = scale(trainS);
    svg.rect(x, yTrain, barWidth, area.y0 - yTrain, READ_COLOR);
    const yAgg = scale(trainS + aggS);
    svg.rect(x, yAgg, barWidth, yTrain - yAgg, COMPUTE_COLOR);
    const note = `${row.idlePct.toFixed(1)}% idle`;
    svg.text(x + barWidth / 2, yAgg - 6, note, { anchor: "middle", size: 10 });
    svg.text(x + barWidth / 2, area.y0 + 16, row.model, { anchor: "middle", size: 11 });
    annotations.push(`${row.model}: ${note}`);
  });

  drawAxis(svg, scale, area.x0, area.x1, "round time (s)", shortNumber);
  svg.text(WIDTH / 2, 22, "Round time: client training vs aggregation",
           { anchor: "middle", size: 14, bold: true });
  legend(svg, [["client training", READ_COLOR], ["aggregation", COMPUTE_COLOR]],
         area.x0, HEIGHT - 18);

  return {
    svg: svg.render(),
    meta: {
      kind: "round_breakdown",
      series: ["t_train_ms", "t_agg_ms"],
      bars: rows.length,
      points: 0,
      annotations,
      infeasible: [],
      notes: [],
    },
  };
}

// -- shard_sweep ---------------------------------------------------------------

export function renderShardSweep(rows: SweepRow[]): RenderedFigure {
  const usable = rows.filter((r) => r.feasible);
  if (usable.length === 0) throw new SchemaError("sweep has no feasible rows");
  const svg = new SvgBuilder(WIDTH, HEIGHT);
  const area = plotArea();
  const totals = usable.map((r) => {
    requireFeasibleTimings(r);
    return r.s3ReadS + r.computeS + r.s3WriteS;
  });
  const scale = linearScale(Math.max(...totals), area.h, area.y0);

  const slot = area.w / usable.length;
  const barWidth = Math.min(72, slot * 0.55);
  const annotations: string[] = [];
  usable.forEach((row, i) => {
    requireFeasibleTimings(row);
    const x = area.x0 + slot * (i + 0.5) - barWidth / 2;
    let top = area.y0;
    for (const [value, color] of [
      [row.s3ReadS, READ_COLOR],
      [row.computeS, COMPUTE_COLOR],
      [row.s3WriteS, WRITE_COLOR],
    ] as Array<[number, string]>) {
      const y = top - (area.y0 - scale(value));
      svg.rect(x, y, barWidth, top - y, color);
      top = y;
    }
    if (row.speedupVsFirst !== null) {
      const note = `${row.speedupVsFirst.toFixed(1)}x`;
      svg.text(x + barWidth / 2, top - 6, note,
               { anchor: "middle", size: 11, bold: true });
      annotations.push(`M=${row.m}: ${note}`);
    }
    svg.text(x + barWidth / 2, area.y0 + 16, `M=${row.m}`,
             { anchor: "middle", size: 11 });
  });

  drawAxis(svg, scale, area.x0, area.x1, "aggregation time (s)", shortNumber);
  svg.text(WIDTH / 2, 22, `Shard sweep: ${usable[0]?.model ?? ""} (N=${usable[0]?.n ?? "?"})`,
           { anchor: "middle", size: 14, bold: true });
  legend(svg, [["object-store read", READ_COLOR], ["averaging", COMPUTE_COLOR],
               ["object-store write", WRITE_COLOR]], area.x0, HEIGHT - 18);

  return {
    svg: svg.render(),
    meta: {
      kind: "shard_sweep",
      series: ["s3_read_s", "compute_s", "s3_write_s"],
      bars: usable.length,
      points: 0,
      annotations,
      infeasible: [],
      notes: [],
    },
  };
}

// -- cost_breakdown ---------------------------------------------------------------

export function renderCostBreakdown(rows: SweepRow[]): RenderedFigure {
  const usable = rows.filter((r) => r.feasible);
  if (usable.length === 0) throw new SchemaError("sweep has no feasible rows");
  const svg = new SvgBuilder(WIDTH, HEIGHT);
  const area = plotArea();
  const totals = usable.map((r) => ((r.lambdaCost ?? 0) + (r.s3Cost ?? 0)) * 1000);
  const scale = linearScale(Math.max(...totals), area.h, area.y0);

  const slot = area.w / usable.length;
  const barWidth = Math.min(72, slot * 0.55);
  usable.forEach((row, i) => {
    const x = area.x0 + slot * (i + 0.5) - barWidth / 2;
    const lambda1k = (row.lambdaCost ?? 0) * 1000;
    const s31k = (row.s3Cost ?? 0) * 1000;
    const yLambda = scale(lambda1k);
    svg.rect(x, yLambda, barWidth, area.y0 - yLambda, LAMBDA_COLOR);
    const yTotal = scale(lambda1k + s31k);
    svg.rect(x, yTotal, barWidth, yLambda - yTotal, S3_COLOR);
    svg.text(x + barWidth / 2, yTotal - 6, `$${shortNumber(lambda1k + s31k)}`,
             { anchor: "middle", size: 10 });
    svg.text(x + barWidth / 2, area.y0 + 16, `M=${row.m}`,
             { anchor: "middle", size: 11 });
  });

  drawAxis(svg, scale, area.x0, area.x1, "cost per 1K rounds ($)", shortNumber);
  svg.text(WIDTH / 2, 22, "Cost decomposition: compute vs object-store requests",
           { anchor: "middle", size: 14, bold: true });
  legend(svg, [["function compute", LAMBDA_COLOR], ["object-store requests", S3_COLOR]],
         area.x0, HEIGHT - 18);

  return {
    svg: svg.render(),
    meta: {
      kind: "cost_breakdown",
      series: ["lambda_cost", "s3_cost"],
      bars: usable.length,
      points: 0,
      annotations: [],
      infeasible: [],
      notes: [],
    },
  };
}

// -- tradeoff -----------------------------------------------------------------------

export function renderTradeoff(rows: SweepRow[]): RenderedFigure {
  const usable = rows.filter((r) => r.feasible
    && r.wallClockS !== null && r.costPer1k !== null);
  if (usable.length === 0) throw new SchemaError("sweep has no feasible rows");
  const svg = new SvgBuilder(WIDTH, HEIGHT);
  const area = plotArea();
  const yScale = linearScale(Math.max(...usable.map((r) => r.costPer1k as number)),
                             area.h, area.y0);
  const xMax = Math.max(...usable.map((r) => r.wallClockS as number)) * 1.08;
  const xOf = (v: number) => area.x0 + (v / xMax) * area.w;

  drawAxis(svg, yScale, area.x0, area.x1, "cost per 1K rounds ($)", shortNumber);
  svg.line(area.x0, area.y0, area.x1, area.y0);
  for (const f of [0.25, 0.5, 0.75, 1.0]) {
    const v = xMax * f;
    svg.line(xOf(v), area.y0, xOf(v), area.y0 + 4);
    svg.text(xOf(v), area.y0 + 16, shortNumber(v), { anchor: "middle", size: 10 });
  }
  svg.text((area.x0 + area.x1) / 2, HEIGHT - 30, "wall-clock time (s)",
           { anchor: "middle", size: 12 });

  const annotations: string[] = [];
  usable.forEach((row) => {
    const x = xOf(row.wallClockS as number);
    const y = yScale(row.costPer1k as number);
    svg.circle(x, y, 5, TOPOLOGY_COLORS[row.topology] ?? "#333");
    const label = `M=${row.m}`;
    svg.text(x + 8, y - 6, label, { size: 10 });
    annotations.push(label);
  });

  svg.text(WIDTH / 2, 22, "Latency vs cost", { anchor: "middle", size: 14, bold: true });

  return {
    svg: svg.render(),
    meta: {
      kind: "tradeoff",
      series: ["cost_per_1k vs wall_clock_s"],
      bars: 0,
      points: usable.length,
      annotations,
      infeasible: [],
      notes: [],
    },
  };
}

// -- cross_arch ------------------------------------------------------------------------

export function renderCrossArch(rows: SweepRow[]): RenderedFigure {
  if (rows.length === 0) throw new SchemaError("sweep has no rows");
  const models = [...new Set(rows.map((r) => r.model))];
  const topologies = [...new Set(rows.map((r) => r.topology))];
  const svg = new SvgBuilder(WIDTH, HEIGHT);
  svg.raw(HATCH_DEF);

  const panelWidth = (WIDTH - MARGIN.left - MARGIN.right - 60) / 2;
  const area = plotArea();
  const leftArea = { ...area, x0: MARGIN.left, x1: MARGIN.left + panelWidth, w: panelWidth };
  const rightX0 = MARGIN.left + panelWidth + 60;
  const rightArea = { ...area, x0: rightX0, x1: rightX0 + panelWidth, w: panelWidth };

  const feasibleRows = rows.filter((r) => r.feasible);
  const wallMax = Math.max(...feasibleRows.map((r) => r.wallClockS ?? 0));
  const costValues = feasibleRows.map((r) => r.costPer1k ?? 0).filter((v) => v > 0);
  const wallScale = linearScale(wallMax, area.h, area.y0);
  const costScale = logScale(Math.max(...costValues), Math.min(...costValues),
                             area.h, area.y0);

  const infeasible: string[] = [];

  const drawPanel = (panel: typeof leftArea, scale: LinearScale,
                     value: (r: SweepRow) => number | null) => {
    const group = panel.w / models.length;
    const barWidth = Math.min(22, (group * 0.7) / topologies.length);
    models.forEach((model, mi) => {
      topologies.forEach((topology, ti) => {
        const row = rows.find((r) => r.model === model && r.topology === topology);
        if (!row) return;
        const x = panel.x0 + group * mi
          + (group - barWidth * topologies.length) / 2 + ti * barWidth;
        if (!row.feasible) {
          svg.rect(x, panel.y1, barWidth, panel.y0 - panel.y1, "url(#hatch)",
                   'stroke="#b33" stroke-width="0.5"');
          infeasible.push(`${topology}/${model}`);
          return;
        }
        const v = value(row);
        if (v === null || v <= 0) return;
        const y = scale(v);
        svg.rect(x, y, barWidth, panel.y0 - y, TOPOLOGY_COLORS[topology] ?? "#777");
      });
      svg.text(panel.x0 + group * (mi + 0.5), panel.y0 + 16, model,
               { anchor: "middle", size: 9 });
    });
  };

  drawPanel(leftArea, wallScale, (r) => r.wallClockS);
  drawAxis(svg, wallScale, leftArea.x0, leftArea.x1, "wall-clock (s)", shortNumber);
  drawPanel(rightArea, costScale, (r) => r.costPer1k);
  for (const tick of costScale.ticks) {
    const y = costScale(tick);
    svg.line(rightArea.x0 - 4, y, rightArea.x0, y);
    svg.text(rightArea.x0 - 8, y + 4, shortNumber(tick), { anchor: "end", size: 10 });
  }
  svg.line(rightArea.x0, rightArea.y0, rightArea.x0, rightArea.y1);
  svg.text(rightArea.x0 - 44, (rightArea.y0 + rightArea.y1) / 2,
           "cost per 1K rounds ($, log)",
           { anchor: "middle", rotate: -90, size: 12 });

  svg.text(WIDTH / 2, 22, "Cross-architecture comparison",
           { anchor: "middle", size: 14, bold: true });
  const legendEntries: Array<[string, string, boolean?]> =
    topologies.map((t) => [t, TOPOLOGY_COLORS[t] ?? "#777"] as [string, string]);
  const notes: string[] = [];
  if (infeasible.length > 0) {
    legendEntries.push(["exceeds function memory", "#fff", true]);
    notes.push(`not run (over memory ceiling): ${[...new Set(infeasible)].join(", ")}`);
  }
  legend(svg, legendEntries, MARGIN.left, HEIGHT - 18);

  return {
    svg: svg.render(),
    meta: {
      kind: "cross_arch",
      series: topologies,
      bars: rows.filter((r) => r.feasible).length * 2,
      points: 0,
      annotations: [],
      infeasible: [...new Set(infeasible)],
      notes,
    },
  };
}

// -- dispatch ------------------------------------------------------------------------------

export function renderFigure(kind: string, csvText: string): RenderedFigure {
  switch (kind) {
    case "round_breakdown":
      return renderRoundBreakdown(parseIdleCsv(csvText));
    case "shard_sweep":
      return renderShardSweep(parseSweepCsv(csvText));
    case "cost_breakdown":
      return renderCostBreakdown(parseSweepCsv(csvText));
    case "tradeoff":
      return renderTradeoff(parseSweepCsv(csvText));
    case "cross_arch":
      return renderCrossArch(parseSweepCsv(csvText));
    default:
      throw new SchemaError(
        `unknown figure kind '${kind}', expected one of: ${FIGURE_KINDS.join(", ")}`);
  }
}
