import { readFileSync, writeFileSync } from "node:fs";

export interface Table {
  path: string;
  header: string[];
  rows: string[][];
}

/** Read one of the simulator's CSV tables (plain values, no quoting). */
export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  return { path, header, rows };
}

/** Fail with the missing column names spelled out. */
export function requireColumns(table: Table, columns: string[]): void {
  const missing = columns.filter((c) => !table.header.includes(c));
  if (missing.length > 0) {
    throw new Error(
      `${table.path}: missing expected column(s) ${missing.join(", ")} ` +
        `(found: ${table.header.join(", ")})`,
    );
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`${table.path}: missing expected column(s) ${name}`);
  }
  return table.rows.map((row) => row[idx]);
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((value) => {
    const x = Number(value);
    if (Number.isNaN(x) && value !== "nan") {
      throw new Error(`${table.path}: non-numeric value ${value} in column ${name}`);
    }
    return x;
  });
}

/** Distinct values of a column, in first-appearance order. */
export function distinct(values: string[]): string[] {
  const seen = new Set<string>();
  const out: string[] = [];
  for (const v of values) {
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v);
    }
  }
  return out;
}

export function writeCsv(path: string, header: string[], rows: (string | number)[][]): void {
  const body = rows.map((row) => row.map(String).join(",")).join("\n");
  writeFileSync(path, `${header.join(",")}\n${body}${rows.length ? "\n" : ""}`);
}
