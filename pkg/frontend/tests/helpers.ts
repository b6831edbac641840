// Loads the recorded API fixtures. See scripts/record-fixtures.py;
// nothing in tests/fixtures/ is hand-written.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type {
  DatasetDoc,
  DatasetSummary,
  EvalSummary,
  ReportDoc,
  RunDoc,
  RunSummary,
  WsMessage,
} from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf8")) as T;
}

export const runsFixture = (): RunSummary[] => fixture<{ runs: RunSummary[] }>("runs.json").runs;
export const runFixture = (): RunDoc => fixture<RunDoc>("run_schedule-demo.json");
export const datasetsFixture = (): DatasetSummary[] =>
  fixture<{ datasets: DatasetSummary[] }>("datasets.json").datasets;
export const datasetFixture = (): DatasetDoc => fixture<DatasetDoc>("dataset_sched.json");
export const evalsFixture = (): EvalSummary[] => fixture<{ evals: EvalSummary[] }>("evals.json").evals;
export const reportFixture = (): ReportDoc =>
  fixture<{ status: string; report: ReportDoc }>("eval_run.json").report;
export const transcriptFixture = (): WsMessage[] => fixture<WsMessage[]>("ws_transcript.json");
