// DOM rendering. Everything here is a projection of ConsoleState; no
// fetches, no sockets, no pixel math beyond copying decoded buffers onto
// canvases.

import { FramePixels, toRgba } from "./transport.js";
import { OP_TEMPLATES, templateFor } from "./pipeline.js";
import {
  ConsoleState,
  missionControlsEnabled,
  processEnabled,
  snapEnabled,
} from "./state.js";

export function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function paintFrame(canvas: HTMLCanvasElement, frame: FramePixels): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  if (canvas.width !== frame.width || canvas.height !== frame.height) {
    canvas.width = frame.width;
    canvas.height = frame.height;
  }
  ctx.putImageData(new ImageData(toRgba(frame), frame.width, frame.height), 0, 0);
}

export function paintHistogram(canvas: HTMLCanvasElement, bins: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#0b1e33";
  ctx.fillRect(0, 0, width, height);
  const peak = Math.max(1, ...bins);
  const barWidth = width / 256;
  ctx.fillStyle = "#6fc3ff";
  bins.forEach((count, level) => {
    const h = Math.round(((height - 4) * count) / peak);
    ctx.fillRect(level * barWidth, height - h, Math.max(1, barWidth - 0.2), h);
  });
}

export interface UiHooks {
  onConnect(): void;
  onTakeoff(): void;
  onLand(): void;
  onSquare(sideCm: number): void;
  onSnap(): void;
  onStream(on: boolean): void;
  onSelect(id: string): void;
  onDraftAdd(op: string): void;
  onDraftRemove(index: number): void;
  onDraftParam(index: number, name: string, value: unknown): void;
  onProcess(): void;
}

export function wireStaticControls(hooks: UiHooks): void {
  el<HTMLButtonElement>("btn-connect").onclick = () => hooks.onConnect();
  el<HTMLButtonElement>("btn-takeoff").onclick = () => hooks.onTakeoff();
  el<HTMLButtonElement>("btn-land").onclick = () => hooks.onLand();
  el<HTMLButtonElement>("btn-snap").onclick = () => hooks.onSnap();
  el<HTMLButtonElement>("btn-stream-on").onclick = () => hooks.onStream(true);
  el<HTMLButtonElement>("btn-stream-off").onclick = () => hooks.onStream(false);
  el<HTMLButtonElement>("btn-square").onclick = () => {
    const side = Number(el<HTMLInputElement>("square-side").value);
    hooks.onSquare(side);
  };
  el<HTMLButtonElement>("btn-process").onclick = () => hooks.onProcess();
  const addSelect = el<HTMLSelectElement>("draft-op");
  for (const template of OP_TEMPLATES) {
    const option = document.createElement("option");
    option.value = template.op;
    option.textContent = template.label;
    addSelect.appendChild(option);
  }
  el<HTMLButtonElement>("btn-draft-add").onclick = () => hooks.onDraftAdd(addSelect.value);
}

export function render(state: ConsoleState, hooks: UiHooks): void {
  // connection badge + button gating
  const badge = el<HTMLSpanElement>("conn-badge");
  badge.textContent = state.socketUp ? state.connection : `${state.connection} (reconnecting…)`;
  badge.className = `badge ${state.connection}${state.socketUp ? "" : " down"}`;
  el<HTMLButtonElement>("btn-connect").disabled = state.connection !== "disconnected";
  const flying = missionControlsEnabled(state);
  for (const id of ["btn-takeoff", "btn-land", "btn-square", "btn-stream-on", "btn-stream-off"]) {
    el<HTMLButtonElement>(id).disabled = !flying;
  }
  el<HTMLButtonElement>("btn-snap").disabled = !snapEnabled(state);
  el<HTMLButtonElement>("btn-process").disabled = !processEnabled(state);

  // telemetry overlay
  const telemetry = state.telemetry;
  el<HTMLDivElement>("overlay").textContent = telemetry
    ? `${telemetry.phase}  pos (${telemetry.position[0]}, ${telemetry.position[1]})  ` +
      `hdg ${telemetry.heading}°  alt ${telemetry.altitude}  bat ${telemetry.battery}%  ` +
      `frame #${state.liveSeq}`
    : "no telemetry yet";

  // square-side validation mirrors the API precondition
  const sideInput = el<HTMLInputElement>("square-side");
  const side = Number(sideInput.value);
  const sideOk = Number.isInteger(side) && side >= 20 && side <= 1000;
  sideInput.classList.toggle("invalid", !sideOk);
  if (!sideOk) el<HTMLButtonElement>("btn-square").disabled = true;

  renderGallery(state, hooks);
  renderDraft(state, hooks);
  renderEvents(state);

  const toast = el<HTMLDivElement>("toast");
  toast.textContent = state.toast ?? "";
  toast.classList.toggle("visible", state.toast !== null);
}

function renderGallery(state: ConsoleState, hooks: UiHooks): void {
  const box = el<HTMLDivElement>("gallery");
  box.innerHTML = "";
  for (const meta of state.gallery) {
    const item = document.createElement("div");
    item.className = "thumb" + (meta.id === state.selected ? " selected" : "");
    item.dataset.id = meta.id;
    const label = document.createElement("div");
    label.textContent = `${meta.id} · ${meta.mission}${meta.lineage.length ? " · processed" : ""}`;
    const canvas = document.createElement("canvas");
    canvas.width = 96;
    canvas.height = 96;
    canvas.dataset.ppmId = meta.id; // painted lazily by main.ts
    item.append(canvas, label);
    item.onclick = () => hooks.onSelect(meta.id);
    box.appendChild(item);
  }
}

function renderDraft(state: ConsoleState, hooks: UiHooks): void {
  const rows = el<HTMLDivElement>("draft-rows");
  rows.innerHTML = "";
  state.draft.forEach((spec, index) => {
    const row = document.createElement("div");
    row.className = "draft-row" + (state.draftErrorStep === index + 1 ? " error" : "");
    const title = document.createElement("span");
    title.textContent = `${index + 1}. ${templateFor(spec.op)?.label ?? spec.op}`;
    row.appendChild(title);
    for (const field of templateFor(spec.op)?.fields ?? []) {
      const value = spec[field.name];
      if (field.kind === "choice") {
        const select = document.createElement("select");
        for (const choice of field.choices ?? []) {
          const option = document.createElement("option");
          option.value = choice;
          option.textContent = `${field.name}=${choice}`;
          option.selected = choice === value;
          select.appendChild(option);
        }
        select.onchange = () => hooks.onDraftParam(index, field.name, select.value);
        row.appendChild(select);
      } else {
        const input = document.createElement("input");
        input.type = "number";
        input.value = String(value);
        if (field.min !== undefined) input.min = String(field.min);
        if (field.max !== undefined) input.max = String(field.max);
        if (field.step !== undefined) input.step = String(field.step);
        input.title = field.name;
        input.onchange = () => hooks.onDraftParam(index, field.name, Number(input.value));
        row.appendChild(input);
      }
    }
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.onclick = () => hooks.onDraftRemove(index);
    row.appendChild(remove);
    rows.appendChild(row);
  });
}

function renderEvents(state: ConsoleState): void {
  const feed = el<HTMLUListElement>("event-feed");
  feed.innerHTML = "";
  for (const event of state.eventFeed) {
    const li = document.createElement("li");
    li.textContent = `${event.step} — ${event.outcome}`;
    if (event.outcome.startsWith("error") || event.outcome === "timeout") {
      li.className = "failed";
    }
    feed.appendChild(li);
  }
  const status = el<HTMLSpanElement>("mission-status");
  status.textContent = state.missionRunning
    ? "flying…"
    : state.missionStatus
      ? `mission ${state.missionStatus}`
      : "";
}
