// Console state as a pure reducer over API responses and WS messages, so
// every transition is replayable in tests without a DOM or a socket.

import { OpSpec, defaultSpec, validateDraft } from "./pipeline.js";

export type Connection = "disconnected" | "connecting" | "connected";

export interface Telemetry {
  phase: string;
  position: [number, number];
  heading: number;
  altitude: number;
  battery: number;
  streaming: boolean;
  seq: number;
}

export interface SnapshotMeta {
  id: string;
  seq: number;
  timestamp_ms: number;
  mission: string;
  lineage: OpSpec[];
  width: number;
  height: number;
}

export interface MissionEventView {
  step: string;
  outcome: string;
}

export interface HistogramView {
  step: number;
  bins: number[];
}

export interface ConsoleState {
  connection: Connection;
  socketUp: boolean;
  telemetry: Telemetry | null;
  liveSeq: number; // frames painted so far, strictly increasing
  gallery: SnapshotMeta[]; // newest first
  selected: string | null;
  draft: OpSpec[];
  draftErrorStep: number | null; // 1-based row to highlight
  processedId: string | null; // result shown in the "after" pane
  histograms: HistogramView[];
  eventFeed: MissionEventView[];
  missionStatus: string | null;
  missionRunning: boolean;
  toast: string | null;
}

export function initialState(): ConsoleState {
  return {
    connection: "disconnected",
    socketUp: false,
    telemetry: null,
    liveSeq: 0,
    gallery: [],
    selected: null,
    draft: [],
    draftErrorStep: null,
    processedId: null,
    histograms: [],
    eventFeed: [],
    missionStatus: null,
    missionRunning: false,
    toast: null,
  };
}

export type Action =
  | { type: "socket-open" }
  | { type: "socket-closed" }
  | { type: "connect-started" }
  | { type: "connect-ok" }
  | { type: "connect-failed"; detail: string }
  | { type: "telemetry"; telemetry: Telemetry }
  | { type: "frame" }
  | { type: "gallery-loaded"; items: SnapshotMeta[] }
  | { type: "snapped"; meta: SnapshotMeta }
  | { type: "select"; id: string }
  | { type: "draft-add"; op: string }
  | { type: "draft-remove"; index: number }
  | { type: "draft-set-param"; index: number; name: string; value: unknown }
  | { type: "draft-error"; step: number }
  | { type: "processed"; meta: SnapshotMeta; histograms: HistogramView[] }
  | { type: "mission-started" }
  | { type: "mission-report"; status: string; events: MissionEventView[] }
  | { type: "toast"; message: string }
  | { type: "clear-toast" };

export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.type) {
    case "socket-open":
      return { ...state, socketUp: true };
    case "socket-closed":
      return { ...state, socketUp: false };
    case "connect-started":
      return { ...state, connection: "connecting" };
    case "connect-ok":
      return { ...state, connection: "connected" };
    case "connect-failed":
      return { ...state, connection: "disconnected", toast: action.detail };
    case "telemetry":
      return { ...state, telemetry: action.telemetry };
    case "frame":
      return { ...state, liveSeq: state.liveSeq + 1 };
    case "gallery-loaded": {
      const newestFirst = [...action.items].reverse();
      const selected =
        state.selected && action.items.some((m) => m.id === state.selected)
          ? state.selected
          : newestFirst[0]?.id ?? null;
      return { ...state, gallery: newestFirst, selected };
    }
    case "snapped":
      return {
        ...state,
        gallery: [action.meta, ...state.gallery],
        selected: action.meta.id,
        processedId: null,
        histograms: [],
      };
    case "select":
      return { ...state, selected: action.id, processedId: null, histograms: [], draftErrorStep: null };
    case "draft-add":
      return { ...state, draft: [...state.draft, defaultSpec(action.op)], draftErrorStep: null };
    case "draft-remove":
      return {
        ...state,
        draft: state.draft.filter((_, i) => i !== action.index),
        draftErrorStep: null,
      };
    case "draft-set-param": {
      const draft = state.draft.map((spec, i) =>
        i === action.index ? { ...spec, [action.name]: action.value } : spec,
      );
      return { ...state, draft, draftErrorStep: null };
    }
    case "draft-error":
      return { ...state, draftErrorStep: action.step };
    case "processed":
      return {
        ...state,
        gallery: [action.meta, ...state.gallery],
        processedId: action.meta.id,
        histograms: action.histograms,
        draftErrorStep: null,
      };
    case "mission-started":
      return { ...state, missionRunning: true, missionStatus: null, eventFeed: [] };
    case "mission-report":
      return {
        ...state,
        missionRunning: false,
        missionStatus: action.status,
        eventFeed: action.events,
      };
    case "toast":
      return { ...state, toast: action.message };
    case "clear-toast":
      return { ...state, toast: null };
    default:
      return state;
  }
}

// Derived UI guards; button-gating rules live here, not in the DOM code.

export function missionControlsEnabled(state: ConsoleState): boolean {
  return state.connection === "connected" && !state.missionRunning;
}

export function snapEnabled(state: ConsoleState): boolean {
  return state.connection === "connected";
}

export function processEnabled(state: ConsoleState): boolean {
  return state.selected !== null && state.draft.length > 0 && validateDraft(state.draft) === null;
}
