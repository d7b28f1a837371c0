// Browser entry point: wires the session, renderer and DOM controls.
//
// A checkpoint arrives through the file picker or a ?ckpt=URL parameter.
// The grid steps on a timer (adjustable steps/second); clicking the canvas
// either delivers a one-step environment signal or paints circular damage,
// depending on the selected mode.

import { parseCheckpoint, Checkpoint, CheckpointError } from "./checkpoint.js";
import { Session } from "./sim.js";
import { compositeBytes, channelBytes } from "./render.js";

const CANVAS_SCALE = 12;

let session: Session | null = null;
let running = false;
let timer: number | null = null;
let stepsPerSecond = 20;
let viewChannel = -1; // -1 = composite RGBA
let brushRadius = 2.5;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.style.display = "block";
}

function clearError(): void {
  el<HTMLDivElement>("error-banner").style.display = "none";
}

function genomeFromToggles(): number[] {
  const boxes = document.querySelectorAll<HTMLInputElement>("#genome-toggles input");
  const genome: number[] = [];
  boxes.forEach((box) => genome.push(box.checked ? 1 : 0));
  return genome;
}

function buildGenomeToggles(ckpt: Checkpoint): void {
  const host = el<HTMLDivElement>("genome-toggles");
  host.innerHTML = "";
  for (let i = 0; i < ckpt.grid.genomeLen; i++) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.addEventListener("change", () => {
      if (session) session.reset(genomeFromToggles());
    });
    label.appendChild(box);
    label.appendChild(document.createTextNode(` c${4 + i}`));
    host.appendChild(label);
  }
  if (ckpt.grid.genomeLen === 0) {
    host.textContent = "(no genome channels)";
  }
}

function buildChannelSelect(ckpt: Checkpoint): void {
  const select = el<HTMLSelectElement>("channel-select");
  select.innerHTML = "";
  const composite = document.createElement("option");
  composite.value = "-1";
  composite.textContent = "RGBA composite";
  select.appendChild(composite);
  for (let ch = 0; ch < ckpt.grid.channels; ch++) {
    const opt = document.createElement("option");
    opt.value = String(ch);
    let name = `c${ch}`;
    if (ch < 3) name += " (color)";
    else if (ch === 3) name += " (alpha)";
    else if (ch < 4 + ckpt.grid.genomeLen) name += " (genome)";
    else if (ch === 16) name += " (environment)";
    else name += " (hidden)";
    opt.textContent = name;
    select.appendChild(opt);
  }
  select.value = "-1";
  viewChannel = -1;
}

function render(): void {
  if (!session) return;
  const grid = session.grid;
  const canvas = el<HTMLCanvasElement>("grid-canvas");
  canvas.width = grid.width * CANVAS_SCALE;
  canvas.height = grid.height * CANVAS_SCALE;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;

  const bytes = viewChannel < 0 ? compositeBytes(grid) : channelBytes(grid, viewChannel);
  const image = new ImageData(new Uint8ClampedArray(bytes), grid.width, grid.height);

  const small = document.createElement("canvas");
  small.width = grid.width;
  small.height = grid.height;
  const smallCtx = small.getContext("2d");
  if (!smallCtx) return;
  smallCtx.putImageData(image, 0, 0);

  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(small, 0, 0, canvas.width, canvas.height);

  el<HTMLSpanElement>("step-counter").textContent = String(session.stepCount);
  el<HTMLSpanElement>("alive-counter").textContent = String(session.aliveCount());
  renderLog();
}

function renderLog(): void {
  if (!session) return;
  const box = el<HTMLTextAreaElement>("event-log");
  const tail = session.log.slice(-40);
  box.value = tail
    .map((e) => `step ${e.step}: ${e.kind} ${e.detail}`)
    .join("\n");
  box.scrollTop = box.scrollHeight;
}

function tick(): void {
  if (!session || !running) return;
  session.stepOnce();
  render();
}

function restartTimer(): void {
  if (timer !== null) window.clearInterval(timer);
  timer = window.setInterval(tick, 1000 / stepsPerSecond);
}

function setRunning(on: boolean): void {
  running = on;
  el<HTMLButtonElement>("play-pause").textContent = on ? "Pause" : "Play";
}

function cellFromMouse(ev: MouseEvent): [number, number] | null {
  if (!session) return null;
  const canvas = el<HTMLCanvasElement>("grid-canvas");
  const rect = canvas.getBoundingClientRect();
  const col = Math.floor(((ev.clientX - rect.left) / rect.width) * session.grid.width);
  const row = Math.floor(((ev.clientY - rect.top) / rect.height) * session.grid.height);
  if (row < 0 || row >= session.grid.height || col < 0 || col >= session.grid.width) {
    return null;
  }
  return [row, col];
}

function interactionMode(): string {
  const checked = document.querySelector<HTMLInputElement>(
    "input[name='mode']:checked",
  );
  return checked ? checked.value : "signal";
}

function handlePointer(ev: MouseEvent): void {
  const cell = cellFromMouse(ev);
  if (!cell || !session) return;
  const [row, col] = cell;
  if (interactionMode() === "damage") {
    session.queueDamage(row, col, brushRadius);
    // Apply immediately so dragging feels like painting even when paused.
    session.stepOnce();
  } else {
    session.queueSignal(row, col);
    if (!running) session.stepOnce();
  }
  render();
}

function adoptCheckpoint(ckpt: Checkpoint): void {
  clearError();
  session = new Session(ckpt, null, Date.now() & 0xffffffff);
  buildGenomeToggles(ckpt);
  buildChannelSelect(ckpt);

  const signalRadio = document.querySelector<HTMLInputElement>(
    "input[name='mode'][value='signal']",
  );
  if (signalRadio) {
    signalRadio.disabled = !ckpt.grid.envEnabled;
    signalRadio.title = ckpt.grid.envEnabled
      ? "Click a cell to set its environment channel to 1 for one step"
      : "This checkpoint has no environment channel";
    if (!ckpt.grid.envEnabled) {
      const damageRadio = document.querySelector<HTMLInputElement>(
        "input[name='mode'][value='damage']",
      );
      if (damageRadio) damageRadio.checked = true;
    }
  }

  const meta = ckpt.metadata;
  el<HTMLSpanElement>("model-info").textContent =
    `${ckpt.grid.height}x${ckpt.grid.width}, ${ckpt.grid.channels} channels, ` +
    `hidden ${ckpt.params.hiddenSize}` +
    (meta && meta["family"] ? `, ${meta["family"]}` : "");

  setRunning(true);
  restartTimer();
  render();
}

function loadText(text: string): void {
  try {
    adoptCheckpoint(parseCheckpoint(text));
  } catch (exc) {
    if (exc instanceof CheckpointError) {
      showError(`Checkpoint rejected: ${exc.message}`);
    } else {
      showError(`Unexpected error: ${exc}`);
    }
  }
}

async function loadFromUrl(url: string): Promise<void> {
  try {
    const resp = await fetch(url);
    if (!resp.ok) {
      showError(`Fetch failed: ${resp.status} ${resp.statusText}`);
      return;
    }
    loadText(await resp.text());
  } catch (exc) {
    showError(`Fetch failed: ${exc}`);
  }
}

function wireControls(): void {
  el<HTMLInputElement>("file-input").addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files && input.files[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => loadText(String(reader.result));
    reader.readAsText(file);
  });

  el<HTMLButtonElement>("play-pause").addEventListener("click", () => {
    setRunning(!running);
  });

  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    if (!session) return;
    session.reset(genomeFromToggles());
    render();
  });

  el<HTMLButtonElement>("step-once").addEventListener("click", () => {
    if (!session) return;
    session.stepOnce();
    render();
  });

  const speed = el<HTMLInputElement>("speed");
  speed.addEventListener("input", () => {
    stepsPerSecond = Number(speed.value);
    el<HTMLSpanElement>("speed-label").textContent = `${stepsPerSecond}/s`;
    restartTimer();
  });

  const brush = el<HTMLInputElement>("brush");
  brush.addEventListener("input", () => {
    brushRadius = Number(brush.value);
    el<HTMLSpanElement>("brush-label").textContent = brushRadius.toFixed(1);
  });

  el<HTMLSelectElement>("channel-select").addEventListener("change", (ev) => {
    viewChannel = Number((ev.target as HTMLSelectElement).value);
    render();
  });

  el<HTMLButtonElement>("export-log").addEventListener("click", () => {
    if (!session) return;
    const blob = new Blob([session.exportLog()], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "event-log.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  const canvas = el<HTMLCanvasElement>("grid-canvas");
  let dragging = false;
  canvas.addEventListener("mousedown", (ev) => {
    dragging = true;
    handlePointer(ev);
  });
  canvas.addEventListener("mousemove", (ev) => {
    // Only damage drags continuously; signals are one per click.
    if (dragging && interactionMode() === "damage") handlePointer(ev);
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
}

window.addEventListener("load", () => {
  wireControls();
  const params = new URLSearchParams(window.location.search);
  const url = params.get("ckpt");
  if (url) {
    void loadFromUrl(url);
  }
});
