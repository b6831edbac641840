// Number and payload formatting. Every value shown in the UI passes
// through here unchanged except for presentation.

export function fmtMs(ms: number | undefined | null): string {
  if (ms === undefined || ms === null) return "";
  if (ms >= 10_000) return `${(ms / 1000).toFixed(1)} s`;
  return `${ms} ms`;
}

export function fmtTokens(total: number | undefined | null): string {
  if (!total) return "";
  return `${total} tok`;
}

export function fmtScore(value: number): string {
  return value.toFixed(2);
}

export function fmtTimestamp(tsUnixMs: number | undefined): string {
  if (!tsUnixMs) return "";
  return new Date(tsUnixMs).toISOString().replace("T", " ").slice(0, 19);
}

export function fmtJson(value: unknown): string {
  if (value === undefined) return "";
  return JSON.stringify(value, null, 2);
}

export function fmtCompact(value: unknown): string {
  if (value === undefined) return "";
  if (typeof value === "string") return value;
  return JSON.stringify(value) ?? "";
}
