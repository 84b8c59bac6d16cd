// Bootstrap: wire the API + WebSocket into the reducer and keep the DOM
// in sync. Frame handling coalesces to the latest record before painting.

import { ApiFailure, makeApi } from "./api.js";
import { toJsonContract, validateDraft } from "./pipeline.js";
import { Action, ConsoleState, Telemetry, initialState, reduce } from "./state.js";
import { FramePixels, decodeFrameRecord, decodePpm } from "./transport.js";
import { el, paintFrame, paintHistogram, render, wireStaticControls } from "./ui.js";

const api = makeApi("");
let state: ConsoleState = initialState();
let pendingFrame: FramePixels | null = null;
const ppmCache = new Map<string, FramePixels>();

function dispatch(action: Action): void {
  state = reduce(state, action);
  render(state, hooks);
  paintPanes();
}

function toast(message: string): void {
  dispatch({ type: "toast", message });
  setTimeout(() => dispatch({ type: "clear-toast" }), 4000);
}

async function refreshGallery(): Promise<void> {
  dispatch({ type: "gallery-loaded", items: await api.snapshots() });
}

async function paintSnapshot(canvas: HTMLCanvasElement, id: string): Promise<void> {
  let frame = ppmCache.get(id);
  if (!frame) {
    frame = decodePpm(await api.snapshotBytes(id));
    ppmCache.set(id, frame);
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const off = document.createElement("canvas");
  paintFrame(off, frame);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function paintPanes(): void {
  // gallery thumbnails render lazily after the DOM pass
  document.querySelectorAll<HTMLCanvasElement>("canvas[data-ppm-id]").forEach((canvas) => {
    const id = canvas.dataset.ppmId;
    if (id) void paintSnapshot(canvas, id).catch(() => undefined);
  });
  const before = el<HTMLCanvasElement>("before");
  const after = el<HTMLCanvasElement>("after");
  if (state.selected) void paintSnapshot(before, state.selected).catch(() => undefined);
  if (state.processedId) {
    void paintSnapshot(after, state.processedId).catch(() => undefined);
  } else {
    after.getContext("2d")?.clearRect(0, 0, after.width, after.height);
  }
  const histogramBox = el<HTMLDivElement>("histogram-box");
  if (state.histograms.length > 0) {
    histogramBox.classList.remove("hidden");
    paintHistogram(el<HTMLCanvasElement>("histogram"), state.histograms[0].bins);
  } else {
    histogramBox.classList.add("hidden");
  }
}

const hooks = {
  onConnect: async () => {
    dispatch({ type: "connect-started" });
    try {
      await api.connect();
      dispatch({ type: "connect-ok" });
      await api.streamOn().catch(() => undefined);
      await refreshGallery();
    } catch (err) {
      dispatch({ type: "connect-failed", detail: describe(err) });
    }
  },
  onTakeoff: () => void runCommand("takeoff"),
  onLand: () => void runCommand("land"),
  onStream: (on: boolean) => {
    void (on ? api.streamOn() : api.streamOff()).catch((err) => toast(describe(err)));
  },
  onSquare: async (sideCm: number) => {
    dispatch({ type: "mission-started" });
    try {
      const report = await api.missionSquare(sideCm);
      dispatch({ type: "mission-report", status: report.status, events: report.events });
      await refreshGallery();
    } catch (err) {
      dispatch({ type: "mission-report", status: "failed", events: [] });
      toast(describe(err));
    }
  },
  onSnap: async () => {
    try {
      dispatch({ type: "snapped", meta: await api.snap() });
    } catch (err) {
      toast(describe(err)); // 409 NoFrameYet lands here
    }
  },
  onSelect: (id: string) => dispatch({ type: "select", id }),
  onDraftAdd: (op: string) => dispatch({ type: "draft-add", op }),
  onDraftRemove: (index: number) => dispatch({ type: "draft-remove", index }),
  onDraftParam: (index: number, name: string, value: unknown) =>
    dispatch({ type: "draft-set-param", index, name, value }),
  onProcess: async () => {
    if (!state.selected) return;
    const problem = validateDraft(state.draft);
    if (problem) {
      dispatch({ type: "draft-error", step: problem.step });
      toast(`step ${problem.step}: ${problem.message}`);
      return;
    }
    try {
      const result = await api.process(state.selected, toJsonContract(state.draft));
      dispatch({ type: "processed", meta: result, histograms: result.histograms ?? [] });
    } catch (err) {
      if (err instanceof ApiFailure) {
        const match = err.detail.match(/step (\d+)/);
        if (match) dispatch({ type: "draft-error", step: Number(match[1]) });
      }
      toast(describe(err));
    }
  },
};

async function runCommand(command: string): Promise<void> {
  try {
    await api.command(command);
  } catch (err) {
    toast(describe(err)); // e.g. DroneError: land while grounded
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

function openSocket(): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${proto}://${location.host}/stream`);
  ws.binaryType = "arraybuffer";
  ws.onopen = () => dispatch({ type: "socket-open" });
  ws.onmessage = (event: MessageEvent) => {
    if (typeof event.data === "string") {
      const message = JSON.parse(event.data) as { type?: string } & Telemetry;
      if (message.type === "telemetry") dispatch({ type: "telemetry", telemetry: message });
      return;
    }
    try {
      pendingFrame = decodeFrameRecord(event.data as ArrayBuffer); // latest wins
    } catch {
      // malformed record: drop silently, the next one will paint
    }
  };
  ws.onclose = () => {
    dispatch({ type: "socket-closed" });
    setTimeout(openSocket, 1500); // auto-retry with a visible badge meanwhile
  };
  ws.onerror = () => ws.close();
}

function paintLoop(): void {
  if (pendingFrame) {
    paintFrame(el<HTMLCanvasElement>("live"), pendingFrame);
    pendingFrame = null;
    dispatch({ type: "frame" });
  }
  requestAnimationFrame(paintLoop);
}

async function boot(): Promise<void> {
  wireStaticControls(hooks);
  render(state, hooks);
  openSocket();
  paintLoop();
  try {
    const svc = await api.state();
    if (svc.connected) dispatch({ type: "connect-ok" });
    await refreshGallery();
  } catch {
    // service not up yet; the operator can still press connect later
  }
}

void boot();
