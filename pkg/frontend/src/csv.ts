/** Canonical CSV parsing shared by the bindings and the parity tests.
 *
 * Values are plain comma-separated cells (ids never contain commas);
 * numeric-looking cells become numbers, everything else stays a string.
 */

export type Row = Record<string, number | string>;

const NUMERIC = /^-?(\d+\.?\d*|\.\d+)(e[+-]?\d+)?$/i;

export function parseCell(cell: string): number | string {
  return NUMERIC.test(cell) ? Number(cell) : cell;
}

export function parseCsv(text: string): Row[] {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    return [];
  }
  const header = lines[0].split(",");
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Row = {};
    header.forEach((name, index) => {
      row[name] = parseCell(cells[index] ?? "");
    });
    return row;
  });
}
