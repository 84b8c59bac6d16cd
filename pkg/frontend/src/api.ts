// Thin typed wrappers over the station's HTTP endpoints. The console does
// no image math: every pixel it shows came back from one of these calls.

import { OpSpec } from "./pipeline.js";
import { HistogramView, MissionEventView, SnapshotMeta, Telemetry } from "./state.js";

export class ApiFailure extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export interface ServiceState {
  connected: boolean;
  sdk_mode: boolean;
  frames_ingested: number;
  latest_seq: number | null;
  telemetry: Telemetry | null;
}

export interface ConnectResult {
  sdk_mode: boolean;
  attempts: number;
}

export interface MissionReport {
  mission: string;
  status: string;
  abort_reason: string | null;
  frames_captured: number;
  events: Array<MissionEventView & { timestamp: number }>;
}

export interface ProcessResult extends SnapshotMeta {
  source: string;
  histograms?: HistogramView[];
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, init);
  if (!resp.ok) {
    let code = `HTTP ${resp.status}`;
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { code?: string; detail?: string };
      code = body.code ?? code;
      detail = body.detail ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiFailure(resp.status, code, detail);
  }
  return (await resp.json()) as T;
}

function post<T>(base: string, path: string, body?: unknown): Promise<T> {
  return request<T>(base, path, {
    method: "POST",
    headers: body === undefined ? undefined : { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
}

export function makeApi(base = "") {
  return {
    connect: () => post<ConnectResult>(base, "/connect"),
    state: () => request<ServiceState>(base, "/state"),
    streamOn: () => post<{ streaming: boolean }>(base, "/stream/on"),
    streamOff: () => post<{ streaming: boolean }>(base, "/stream/off"),
    command: (command: string) => post<{ outcome: string }>(base, "/command", { command }),
    missionSquare: (sideCm: number) =>
      post<MissionReport>(base, "/mission/square", { side_cm: sideCm }),
    snap: () => post<SnapshotMeta>(base, "/snap"),
    snapshots: () => request<SnapshotMeta[]>(base, "/snapshots"),
    process: (snapshotId: string, pipeline: OpSpec[]) =>
      post<ProcessResult>(base, "/process", { snapshot_id: snapshotId, pipeline }),
    snapshotBytes: async (id: string): Promise<Uint8Array> => {
      const resp = await fetch(`${base}/snapshots/${id}`);
      if (!resp.ok) {
        throw new ApiFailure(resp.status, `HTTP ${resp.status}`, `no snapshot ${id}`);
      }
      return new Uint8Array(await resp.arrayBuffer());
    },
  };
}

export type Api = ReturnType<typeof makeApi>;
