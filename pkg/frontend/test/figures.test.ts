import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";

import { SchemaError, parseSweepCsv } from "../src/csv.js";
import { FIGURE_KINDS, renderFigure } from "../src/figures.js";

const here = dirname(fileURLToPath(import.meta.url));
// dist/test -> repo test/data (fixtures are not compiled)
const DATA = join(here, "..", "..", "test", "data");

const sweepCsv = readFileSync(join(DATA, "golden_sweep.csv"), "utf8");
const crossCsv = readFileSync(join(DATA, "golden_cross.csv"), "utf8");
const idleCsv = readFileSync(join(DATA, "golden_idle.csv"), "utf8");

function inputFor(kind: string): string {
  if (kind === "round_breakdown") return idleCsv;
  if (kind === "cross_arch") return crossCsv;
  return sweepCsv;
}

/** Cheap well-formedness check: every opened tag closes. */
function assertParseableSvg(svg: string): void {
  assert.ok(svg.startsWith("<svg "), "starts with <svg");
  assert.ok(svg.trimEnd().endsWith("</svg>"), "ends with </svg>");
  const opens = (svg.match(/<([a-zA-Z]+)[\s>]/g) ?? []).length;
  const closes = (svg.match(/<\/[a-zA-Z]+>/g) ?? []).length;
  const selfClosed = (svg.match(/\/>/g) ?? []).length;
  assert.equal(opens, closes + selfClosed, "all tags balanced");
  assert.ok(!svg.includes("NaN"), "no NaN coordinates");
  assert.ok(!svg.includes("undefined"), "no undefined values");
}

test("every figure kind renders from its golden CSV", () => {
  for (const kind of FIGURE_KINDS) {
    const rendered = renderFigure(kind, inputFor(kind));
    assertParseableSvg(rendered.svg);
    assert.equal(rendered.meta.kind, kind);
    assert.ok(rendered.meta.series.length > 0, `${kind} lists its series`);
  }
});

test("shard sweep draws one stacked bar per shard count with speedup labels", () => {
  const rows = parseSweepCsv(sweepCsv);
  const rendered = renderFigure("shard_sweep", sweepCsv);
  assert.equal(rendered.meta.bars, rows.length);
  assert.deepEqual(rendered.meta.series, ["s3_read_s", "compute_s", "s3_write_s"]);
  // a stack is three rects; the background rect is extra
  const rects = (rendered.svg.match(/<rect /g) ?? []).length;
  assert.ok(rects >= 3 * rows.length + 1);
  assert.equal(rendered.meta.annotations.length, rows.length);
  for (const row of rows) {
    assert.ok(
      rendered.meta.annotations.some((a) => a.startsWith(`M=${row.m}:`)),
      `annotation for M=${row.m}`);
  }
  assert.ok(/1\.0x/.test(rendered.svg), "baseline speedup label in the figure");
});

test("cross-arch figure hatches infeasible configurations and says so", () => {
  const rendered = renderFigure("cross_arch", crossCsv);
  assert.ok(rendered.svg.includes('id="hatch"'));
  assert.ok(rendered.svg.includes('url(#hatch)'));
  assert.deepEqual(rendered.meta.series, ["gradsharding", "lambdafl", "lifl"]);
  assert.deepEqual(rendered.meta.infeasible.sort(), [
    "lambdafl/synthetic-5gb",
    "lifl/synthetic-5gb",
  ]);
  assert.ok(rendered.meta.notes[0]?.includes("not run"));
});

test("round breakdown annotates idle percentages", () => {
  const rendered = renderFigure("round_breakdown", idleCsv);
  assert.equal(rendered.meta.bars, 4);
  assert.ok(rendered.svg.includes("99.6% idle"));
});

test("tradeoff plots one point per feasible row", () => {
  const rendered = renderFigure("tradeoff", sweepCsv);
  assert.equal(rendered.meta.points, parseSweepCsv(sweepCsv).length);
  assert.ok((rendered.svg.match(/<circle /g) ?? []).length === rendered.meta.points);
});

test("single-row csv still renders", () => {
  const lines = sweepCsv.trimEnd().split("\n");
  const single = lines.slice(0, 2).join("\n") + "\n";
  const rendered = renderFigure("shard_sweep", single);
  assert.equal(rendered.meta.bars, 1);
});

test("rendering is byte-stable", () => {
  for (const kind of FIGURE_KINDS) {
    assert.equal(renderFigure(kind, inputFor(kind)).svg,
                 renderFigure(kind, inputFor(kind)).svg);
  }
});

test("missing column is a schema error naming the column", () => {
  const broken = sweepCsv
    .split("\n")
    .map((line) => line.split(",").slice(0, 9).join(","))
    .join("\n");
  assert.throws(() => renderFigure("shard_sweep", broken), (err: unknown) => {
    assert.ok(err instanceof SchemaError);
    assert.match(err.message, /speedup_vs_first/);
    return true;
  });
});

test("unknown figure kind is rejected", () => {
  assert.throws(() => renderFigure("pie", sweepCsv), SchemaError);
});
