// Thin typed wrappers over the documented HTTP endpoints, plus the
// single live WebSocket connection. Nothing here invents server
// behavior; every method maps 1:1 onto a documented route.

import type {
  DatasetDoc,
  DatasetRow,
  DatasetSummary,
  EvalSummary,
  ReportDoc,
  RunDoc,
  RunSummary,
  WsMessage,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    let code = "http_error";
    let message = `${resp.status} ${resp.statusText}`;
    try {
      const body = (await resp.json()) as { error?: string; message?: string };
      code = body.error ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export interface EvalRunState {
  status: "running" | "done";
  config?: string;
  report?: ReportDoc;
}

export class Api {
  base: string;

  constructor(base = "") {
    this.base = base;
  }

  async runs(): Promise<RunSummary[]> {
    const doc = await request<{ runs: RunSummary[] }>(`${this.base}/api/runs`);
    return doc.runs;
  }

  run(runId: string): Promise<RunDoc> {
    return request<RunDoc>(`${this.base}/api/runs/${encodeURIComponent(runId)}`);
  }

  async datasets(): Promise<DatasetSummary[]> {
    const doc = await request<{ datasets: DatasetSummary[] }>(`${this.base}/api/datasets`);
    return doc.datasets;
  }

  dataset(name: string): Promise<DatasetDoc> {
    return request<DatasetDoc>(`${this.base}/api/datasets/${encodeURIComponent(name)}`);
  }

  createDataset(name: string, inputPath: string, outputPath: string): Promise<unknown> {
    return post(`${this.base}/api/datasets`, {
      name,
      input_path: inputPath,
      output_path: outputPath,
    });
  }

  promoteRow(
    dataset: string,
    body: { from_trace: string; reference?: unknown; note?: string },
  ): Promise<DatasetRow> {
    return post<DatasetRow>(`${this.base}/api/datasets/${encodeURIComponent(dataset)}/rows`, body);
  }

  async evals(): Promise<EvalSummary[]> {
    const doc = await request<{ evals: EvalSummary[] }>(`${this.base}/api/evals`);
    return doc.evals;
  }

  async startEval(name: string): Promise<string> {
    const doc = await post<{ eval_run_id: string }>(
      `${this.base}/api/evals/${encodeURIComponent(name)}/run`,
      {},
    );
    return doc.eval_run_id;
  }

  evalRun(evalRunId: string): Promise<EvalRunState> {
    return request<EvalRunState>(`${this.base}/api/evals/runs/${encodeURIComponent(evalRunId)}`);
  }
}

// A subscriber that falls behind is dropped by the server; on any
// close we reconnect with backoff and the app resyncs from the
// snapshot message that opens every connection.

export class LiveSocket {
  private url: string;
  private onMessage: (msg: WsMessage) => void;
  private ws: WebSocket | null = null;
  private stopped = false;
  private backoffMs = 500;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(url: string, onMessage: (msg: WsMessage) => void) {
    this.url = url;
    this.onMessage = onMessage;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.ws?.close();
    this.ws = null;
  }

  private connect(): void {
    if (this.stopped) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = 500;
    };
    ws.onmessage = (ev: MessageEvent) => {
      let msg: WsMessage;
      try {
        msg = JSON.parse(String(ev.data)) as WsMessage;
      } catch {
        return;
      }
      this.onMessage(msg);
    };
    ws.onclose = () => {
      if (this.stopped) return;
      this.timer = setTimeout(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, 5000);
    };
  }
}

export function liveUrl(base: string = location.origin): string {
  return base.replace(/^http/, "ws") + "/api/live";
}
