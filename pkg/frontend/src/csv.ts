import { TableSpec } from "./types.js";

export interface CsvParseResult {
  table?: TableSpec;
  errors: string[];
}

function splitLine(line: string): string[] {
  // simple quoted-field CSV: enough for performance tables
  const fields: string[] = [];
  let cur = "";
  let quoted = false;
  for (let k = 0; k < line.length; k += 1) {
    const ch = line[k];
    if (quoted) {
      if (ch === '"' && line[k + 1] === '"') {
        cur += '"';
        k += 1;
      } else if (ch === '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      fields.push(cur);
      cur = "";
    } else {
      cur += ch;
    }
  }
  fields.push(cur);
  return fields.map((f) => f.trim());
}

/**
 * Parse a performance-table CSV: header `id,<criterion>...`, one row per
 * alternative, numeric cells. Criterion scales default to the observed
 * column range (padded if constant) with two subintervals.
 */
export function parseTableCsv(text: string): CsvParseResult {
  const errors: string[] = [];
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length < 3) {
    return { errors: ["need a header row and at least two alternatives"] };
  }
  const header = splitLine(lines[0]!);
  if (header.length < 2) {
    return { errors: ["header must name an id column and at least one criterion"] };
  }
  const names = header.slice(1);
  const dupNames = names.filter((n, k) => names.indexOf(n) !== k);
  if (dupNames.length > 0) {
    errors.push(`duplicate criterion names: ${[...new Set(dupNames)].join(", ")}`);
  }

  const alternatives: string[] = [];
  const performances: number[][] = [];
  for (const [rowIdx, line] of lines.slice(1).entries()) {
    const cells = splitLine(line);
    if (cells.length !== header.length) {
      errors.push(`row ${rowIdx + 2}: expected ${header.length} cells, got ${cells.length}`);
      continue;
    }
    const id = cells[0]!;
    if (id === "") {
      errors.push(`row ${rowIdx + 2}: empty alternative id`);
      continue;
    }
    if (alternatives.includes(id)) {
      errors.push(`row ${rowIdx + 2}: duplicate alternative id ${JSON.stringify(id)}`);
      continue;
    }
    const row: number[] = [];
    let ok = true;
    for (const [colIdx, cell] of cells.slice(1).entries()) {
      const value = Number(cell);
      if (cell === "" || !Number.isFinite(value)) {
        errors.push(
          `row ${rowIdx + 2}, column ${JSON.stringify(names[colIdx])}: not a number: ${JSON.stringify(cell)}`,
        );
        ok = false;
      }
      row.push(value);
    }
    if (ok) {
      alternatives.push(id);
      performances.push(row);
    }
  }
  if (errors.length > 0) {
    return { errors };
  }
  if (alternatives.length < 2) {
    return { errors: ["need at least two alternatives"] };
  }

  const criteria = names.map((name, j) => {
    const column = performances.map((row) => row[j]!);
    let lo = Math.min(...column);
    let hi = Math.max(...column);
    if (lo === hi) {
      // pad a degenerate scale so the marginal value function is well defined
      lo -= 0.5;
      hi += 0.5;
    }
    return { name, scale_min: lo, scale_max: hi, subintervals: 2 };
  });
  return { table: { alternatives, criteria, performances }, errors: [] };
}
