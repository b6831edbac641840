// Client-side evaluator for the dataset path syntax (see docs/paths.md),
// used only to preview extractions live in the Add-to-Dataset dialog.
// The service re-parses paths on submit; this mirrors its grammar and
// its error wording so the preview matches what the API will say.

export type Step = { key: string } | { index: number };

export class PathSyntaxError extends Error {
  constructor(public column: number, detail: string) {
    super(`column ${column}: ${detail}`);
  }
}

export class PathStepError extends Error {
  constructor(public step: number, rendered: string, detail: string) {
    super(`step ${step} (${rendered}): ${detail}`);
  }
}

const BARE_KEY = /^[A-Za-z0-9_-]+/;

// Errors point at the column where the failing step begins; an
// invalid escape points at the backslash itself.
export function parsePath(text: string): Step[] {
  if (!text.startsWith("$")) throw new PathSyntaxError(1, "path must start with '$'");
  const steps: Step[] = [];
  let i = 1;
  while (i < text.length) {
    const startCol = i + 1;
    const ch = text[i];
    if (ch === ".") {
      const m = BARE_KEY.exec(text.slice(i + 1));
      if (!m) throw new PathSyntaxError(startCol, "expected a key name after '.'");
      steps.push({ key: m[0] });
      i += 1 + m[0].length;
    } else if (ch === "[") {
      if (text[i + 1] === '"') {
        let j = i + 2;
        let key = "";
        let closed = false;
        while (j < text.length) {
          const c = text[j];
          if (c === '"') {
            closed = true;
            j += 1;
            break;
          }
          if (c === "\\") {
            const next = text[j + 1];
            if (next !== '"' && next !== "\\") {
              throw new PathSyntaxError(j + 1, "invalid escape in quoted key");
            }
            key += next;
            j += 2;
          } else {
            key += c;
            j += 1;
          }
        }
        if (!closed) throw new PathSyntaxError(startCol, "unterminated quoted key");
        if (text[j] !== "]") throw new PathSyntaxError(startCol, "expected ']' after quoted key");
        steps.push({ key });
        i = j + 1;
      } else {
        const m = /^[0-9]+/.exec(text.slice(i + 1));
        if (!m) throw new PathSyntaxError(startCol, "expected digits or a quoted key after '['");
        if (text[i + 1 + m[0].length] !== "]") {
          throw new PathSyntaxError(startCol, "expected ']' after index");
        }
        steps.push({ index: parseInt(m[0], 10) });
        i += m[0].length + 2;
      }
    } else {
      throw new PathSyntaxError(startCol, `unexpected character '${ch}'`);
    }
  }
  return steps;
}

export function renderStep(step: Step): string {
  if ("index" in step) return `[${step.index}]`;
  if (BARE_KEY.exec(step.key)?.[0] === step.key) return `.${step.key}`;
  return `["${step.key.replace(/\\/g, "\\\\").replace(/"/g, '\\"')}"]`;
}

export function renderPath(steps: Step[]): string {
  return "$" + steps.map(renderStep).join("");
}

function typeName(value: unknown): string {
  if (value === null) return "null";
  if (Array.isArray(value)) return "array";
  return typeof value;
}

export function extract(doc: unknown, steps: Step[]): unknown {
  let current = doc;
  steps.forEach((step, idx) => {
    const where = renderStep(step);
    if ("index" in step) {
      if (!Array.isArray(current))
        throw new PathStepError(idx + 1, where, `expected an array, got ${typeName(current)}`);
      if (step.index >= current.length)
        throw new PathStepError(idx + 1, where, `index ${step.index} out of range for array of length ${current.length}`);
      current = current[step.index];
    } else {
      if (current === null || typeof current !== "object" || Array.isArray(current))
        throw new PathStepError(idx + 1, where, `expected an object, got ${typeName(current)}`);
      const obj = current as Record<string, unknown>;
      if (!(step.key in obj))
        throw new PathStepError(idx + 1, where, `key '${step.key}' not found in object`);
      current = obj[step.key];
    }
  });
  return current;
}

export type Preview = { ok: true; value: unknown } | { ok: false; error: string };

/** Parse and extract in one call; returns either the value or the message. */
export function preview(doc: unknown, pathText: string): Preview {
  try {
    return { ok: true, value: extract(doc, parsePath(pathText)) };
  } catch (err) {
    if (err instanceof PathSyntaxError || err instanceof PathStepError) {
      return { ok: false, error: err.message };
    }
    throw err;
  }
}
