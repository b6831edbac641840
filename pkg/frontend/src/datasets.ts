// Dataset browsing plus the add-to-dataset dialog. The dialog is a
// pure model: it prefills the selected dataset's paths, previews the
// extraction against the run's root span exactly as the server will
// perform it, and only submits when the preview succeeds or the
// reference was edited by hand.

import { fmtCompact, fmtJson } from "./format.js";
import { preview, type Preview } from "./paths.js";
import type { DatasetDoc, DatasetSummary, SpanDoc } from "./types.js";
import { h, type VNode } from "./vdom.js";

export function datasetTable(datasets: DatasetSummary[], onOpen?: (name: string) => void): VNode {
  const head = h("tr", {}, [
    h("th", {}, ["name"]),
    h("th", {}, ["input path"]),
    h("th", {}, ["output path"]),
    h("th", {}, ["rows"]),
  ]);
  const body = datasets.map((ds) =>
    h(
      "tr",
      { class: "dataset-row", "data-dataset": ds.name },
      [
        h("td", { class: "mono" }, [ds.name]),
        h("td", { class: "mono" }, [ds.input_path]),
        h("td", { class: "mono" }, [ds.output_path]),
        h("td", { class: "row-count" }, [String(ds.row_count)]),
      ],
      { click: () => onOpen?.(ds.name) },
    ),
  );
  return h("table", { class: "datasets-table" }, [h("thead", {}, [head]), h("tbody", {}, body)]);
}

export function datasetRows(doc: DatasetDoc): VNode {
  const head = h("tr", {}, [
    h("th", {}, ["id"]),
    h("th", {}, ["input"]),
    h("th", {}, ["reference"]),
    h("th", {}, ["source"]),
    h("th", {}, ["note"]),
  ]);
  const body = doc.rows.map((row) =>
    h("tr", { class: "datapoint-row", "data-datapoint": row.id }, [
      h("td", { class: "mono" }, [row.id]),
      h("td", { class: "mono" }, [fmtCompact(row.input)]),
      h("td", { class: "mono" }, [fmtCompact(row.reference_output)]),
      h("td", { class: "mono" }, [row.source_trace ?? ""]),
      h("td", {}, [row.note ?? ""]),
    ]),
  );
  return h("table", { class: "dataset-rows" }, [h("thead", {}, [head]), h("tbody", {}, body)]);
}

// --- add-to-dataset dialog -------------------------------------------

export interface DialogState {
  runId: string;
  root: SpanDoc;
  datasets: DatasetSummary[];
  selected: string | null;
  inputPath: string;
  outputPath: string;
  referenceText: string; // JSON text; empty means "use the extracted value"
  note: string;
  submitError: string | null;
}

export function openDialog(runId: string, root: SpanDoc, datasets: DatasetSummary[]): DialogState {
  const state: DialogState = {
    runId,
    root,
    datasets,
    selected: null,
    inputPath: "$",
    outputPath: "$",
    referenceText: "",
    note: "",
    submitError: null,
  };
  return datasets.length > 0 ? selectDataset(state, datasets[0].name) : state;
}

/** Selecting a dataset prefills its recorded paths. */
export function selectDataset(state: DialogState, name: string): DialogState {
  const ds = state.datasets.find((d) => d.name === name);
  if (!ds) return { ...state, selected: null };
  return {
    ...state,
    selected: name,
    inputPath: ds.input_path,
    outputPath: ds.output_path,
    submitError: null,
  };
}

export interface DialogPreview {
  input: Preview;
  output: Preview;
}

/** Client-side rehearsal of exactly what promotion will extract. */
export function previewDialog(state: DialogState): DialogPreview {
  return {
    input: preview(state.root.input, state.inputPath),
    output: preview(state.root.output, state.outputPath),
  };
}

export interface SubmitBody {
  from_trace: string;
  reference?: unknown;
  note?: string;
}

/**
 * The POST body, or null while a failing path blocks submission.
 * An edited reference overrides the extracted one, so an output
 * preview failure only blocks when the reference box is empty.
 */
export function submitBody(state: DialogState): SubmitBody | null {
  const p = previewDialog(state);
  if (!p.input.ok) return null;
  const body: SubmitBody = { from_trace: state.runId };
  const text = state.referenceText.trim();
  if (text !== "") {
    try {
      body.reference = JSON.parse(text);
    } catch {
      body.reference = text; // plain text is a legitimate reference
    }
  } else if (!p.output.ok) {
    return null;
  }
  if (state.note.trim() !== "") body.note = state.note.trim();
  return body;
}

function previewBlock(label: string, p: Preview): VNode {
  if (p.ok) {
    return h("div", { class: `preview preview-${label} ok` }, [
      h("span", { class: "preview-label" }, [label]),
      h("pre", { class: "preview-value" }, [fmtJson(p.value)]),
    ]);
  }
  return h("div", { class: `preview preview-${label} failed` }, [
    h("span", { class: "preview-label" }, [label]),
    h("span", { class: "path-error" }, [p.error]),
  ]);
}

export interface DialogHandlers {
  onSelect?: (name: string) => void;
  onInputPath?: (text: string) => void;
  onOutputPath?: (text: string) => void;
  onReference?: (text: string) => void;
  onNote?: (text: string) => void;
  onSubmit?: () => void;
  onCancel?: () => void;
}

function fieldValue(ev: Event): string {
  return (ev.target as HTMLInputElement | HTMLTextAreaElement | null)?.value ?? "";
}

export function dialogView(state: DialogState, handlers: DialogHandlers = {}): VNode {
  const p = previewDialog(state);
  const ready = submitBody(state) !== null;
  const options = state.datasets.map((ds) =>
    h(
      "option",
      state.selected === ds.name
        ? { value: ds.name, selected: "selected" }
        : { value: ds.name },
      [ds.name],
    ),
  );
  const body: VNode[] = [
    h("h2", {}, [`Add ${state.runId} to dataset`]),
    h("label", {}, [
      "dataset ",
      h("select", { class: "pick-dataset" }, options, {
        change: (ev) => handlers.onSelect?.(fieldValue(ev)),
      }),
    ]),
    h("label", {}, [
      "input path ",
      h("input", { class: "input-path mono", value: state.inputPath }, [], {
        input: (ev) => handlers.onInputPath?.(fieldValue(ev)),
      }),
    ]),
    previewBlock("input", p.input),
    h("label", {}, [
      "output path ",
      h("input", { class: "output-path mono", value: state.outputPath }, [], {
        input: (ev) => handlers.onOutputPath?.(fieldValue(ev)),
      }),
    ]),
    previewBlock("output", p.output),
    h("label", {}, [
      "reference (blank keeps the extracted value) ",
      h("textarea", { class: "reference mono" }, [state.referenceText], {
        input: (ev) => handlers.onReference?.(fieldValue(ev)),
      }),
    ]),
    h("label", {}, [
      "note ",
      h("input", { class: "note", value: state.note }, [], {
        input: (ev) => handlers.onNote?.(fieldValue(ev)),
      }),
    ]),
  ];
  if (state.submitError) body.push(h("div", { class: "submit-error" }, [state.submitError]));
  body.push(
    h("div", { class: "dialog-actions" }, [
      h(
        "button",
        ready
          ? { class: "submit" }
          : { class: "submit", disabled: "disabled" },
        ["Add row"],
        { click: () => handlers.onSubmit?.() },
      ),
      h("button", { class: "cancel" }, ["Cancel"], { click: () => handlers.onCancel?.() }),
    ]),
  );
  return h("div", { class: "dialog add-to-dataset-dialog" }, body);
}
