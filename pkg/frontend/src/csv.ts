/** Minimal reader for the simulator's numeric CSV outputs. */
import { existsSync, readFileSync } from "node:fs";

export class MissingInput extends Error {}
export class SchemaMismatch extends Error {}

export interface Table {
  header: string[];
  /** column-major numeric data */
  columns: number[][];
  rows: number;
}

export function readCsv(path: string): Table {
  if (!existsSync(path)) {
    throw new MissingInput(`input CSV not found: ${path}`);
  }
  const lines = readFileSync(path, "utf8").trim().split(/\r?\n/);
  if (lines.length < 2) {
    throw new SchemaMismatch(`${path}: need a header plus at least one row`);
  }
  const header = lines[0].split(",").map((s) => s.trim());
  const columns: number[][] = header.map(() => []);
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new SchemaMismatch(
        `${path}:${i + 1}: expected ${header.length} fields, got ${parts.length}`,
      );
    }
    for (let j = 0; j < parts.length; j++) {
      const v = Number(parts[j]);
      if (Number.isNaN(v)) {
        throw new SchemaMismatch(`${path}:${i + 1}: non-numeric value '${parts[j]}'`);
      }
      columns[j].push(v);
    }
  }
  return { header, columns, rows: lines.length - 1 };
}

/** Assert the table carries exactly the expected column names, in order. */
export function requireSchema(t: Table, expected: string[], path: string): void {
  if (t.header.length !== expected.length || !expected.every((h, i) => t.header[i] === h)) {
    throw new SchemaMismatch(
      `${path}: expected columns [${expected.join(",")}], found [${t.header.join(",")}]`,
    );
  }
}
