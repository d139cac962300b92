#!/usr/bin/env node
/**
 * figgen render --kind <kind> --input <csv> --output <file.svg|.html>
 *
 * Writes the figure plus a `<output>.meta.json` sidecar listing the
 * rendered series.  Exits 1 on schema or argument errors, naming the
 * offending column or flag.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";
import { SchemaError } from "./csv.js";
import { FIGURE_KINDS, renderFigure } from "./figures.js";

function usage(): string {
  return [
    "usage: figgen render --kind <kind> --input <csv> --output <file>",
    `  kinds: ${FIGURE_KINDS.join(", ")}`,
    "  output: .svg or .html (SVG embedded)",
  ].join("\n");
}

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new SchemaError(`bad argument '${key ?? ""}'\n${usage()}`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command !== "render") {
      throw new SchemaError(`unknown command '${command ?? ""}'\n${usage()}`);
    }
    const flags = parseFlags(rest);
    for (const required of ["kind", "input", "output"]) {
      if (!flags.has(required)) {
        throw new SchemaError(`missing --${required}\n${usage()}`);
      }
    }
    const kind = flags.get("kind")!;
    const input = flags.get("input")!;
    const output = flags.get("output")!;

    const rendered = renderFigure(kind, readFileSync(input, "utf8"));

    if (output.endsWith(".svg")) {
      writeFileSync(output, rendered.svg);
    } else if (output.endsWith(".html")) {
      writeFileSync(
        output,
        `<!DOCTYPE html>\n<html><head><meta charset="utf-8">` +
        `<title>${basename(output)}</title></head><body>\n` +
        rendered.svg + "</body></html>\n");
    } else {
      throw new SchemaError(
        `unsupported output extension for '${output}'; use .svg or .html`);
    }
    const sidecar = output + ".meta.json";
    writeFileSync(sidecar, JSON.stringify(
      { input, output, ...rendered.meta }, null, 2) + "\n");
    console.log(`wrote ${output} and ${sidecar}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`figgen: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && "code" in err && err.code === "ENOENT") {
      console.error(`figgen: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

import { fileURLToPath } from "node:url";
if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
