// API document shapes, mirrored from docs/api.md and docs/storage.md.
// The UI renders these verbatim; it never derives domain data of its own.

export interface TokenUsage {
  prompt_tokens: number;
  completion_tokens: number;
  total_tokens: number;
}

export interface RunSummary {
  run_id: string;
  framework: string;
  state: "receiving" | "completed" | "aborted";
  started_ts_unix_ms: number;
  event_count: number;
  span_count: number;
  total_tokens: number;
  ended_ts_unix_ms?: number;
  duration_ms?: number;
}

export interface SpanDoc {
  span_id: string;
  kind: string;
  name: string;
  status: "running" | "ok" | "error";
  started_ts_unix_ms?: number;
  ended_ts_unix_ms?: number;
  duration_ms?: number;
  input?: unknown;
  output?: unknown;
  error_message?: string;
  usage?: TokenUsage;
  children: SpanDoc[];
}

export interface PrettyLine {
  span_id: string;
  depth: number;
  headline: string;
  detail?: string;
  duration_ms?: number;
  usage?: TokenUsage;
}

export interface GraphNode {
  id: string;
  label: string;
}

export interface GraphEdge {
  from: string;
  to: string;
  label?: string;
}

export interface GraphDoc {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface RunDoc {
  run_id: string;
  framework: string;
  state: RunSummary["state"];
  event_count: number;
  duration_ms?: number;
  total_usage: TokenUsage;
  anomalies: string[];
  root: SpanDoc;
  graph: GraphDoc | null;
  pretty: PrettyLine[];
}

export interface DatasetSummary {
  name: string;
  input_path: string;
  output_path: string;
  row_count: number;
}

export interface DatasetRow {
  id: string;
  input: unknown;
  reference_output: unknown;
  source_trace?: string;
  note?: string;
}

export interface DatasetDoc {
  name: string;
  input_path: string;
  output_path: string;
  rows: DatasetRow[];
}

export interface EvalSummary {
  name: string;
  dataset: string;
  evaluators: string[];
  reports: string[];
}

export type RowStatus = "ok" | "run_error" | "timeout" | "extract_error" | "evaluator_error";

export interface ScoreDoc {
  value: number;
  explanation?: string;
}

export interface ReportRow {
  id: string;
  status: RowStatus;
  generated_output?: unknown;
  scores: Record<string, ScoreDoc>;
  error?: string;
  usage?: TokenUsage;
  wall_ms?: number;
  trace_ref?: string;
}

export interface ReportDoc {
  config: string;
  dataset: string;
  started_ts_unix_ms: number;
  ended_ts_unix_ms: number;
  pass_threshold: number;
  rows: ReportRow[];
  aggregates: {
    means: Record<string, number>;
    total_usage: TokenUsage;
    total_wall_ms: number;
    status_counts: Record<RowStatus, number>;
  };
  warnings: string[];
}

// WS /api/live messages

export interface WsSnapshot {
  type: "snapshot";
  runs: RunSummary[];
}

export interface WsRunStarted {
  type: "run_started";
  run_id: string;
  framework: string;
  started_ts_unix_ms?: number;
}

export interface WsEvent {
  type: "event";
  run_id: string;
  seq: number;
  kind: string;
  span_id: string;
  name: string;
}

export interface WsRunFinished {
  type: "run_finished";
  run_id: string;
  state: "completed" | "aborted";
}

export interface WsEvalProgress {
  type: "eval_progress";
  eval_run_id: string;
  row: ReportRow;
}

export interface WsEvalFinished {
  type: "eval_finished";
  eval_run_id: string;
  report?: string;
  error?: string;
}

export type WsMessage =
  | WsSnapshot
  | WsRunStarted
  | WsEvent
  | WsRunFinished
  | WsEvalProgress
  | WsEvalFinished;

// Client-side view state; selections always reference existing API
// resources or are cleared by the screen that owns them.

export type ViewMode = "pretty" | "raw" | "graph";

export interface ViewState {
  screen: "runs" | "datasets" | "evals";
  selectedRun: string | null;
  viewMode: ViewMode;
  selectedDatapoint: string | null;
  liveFollow: boolean;
  collapsed: Set<string>;
}

export function initialViewState(): ViewState {
  return {
    screen: "runs",
    selectedRun: null,
    viewMode: "pretty",
    selectedDatapoint: null,
    liveFollow: true,
    collapsed: new Set(),
  };
}
