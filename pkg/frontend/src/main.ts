/** DOM wiring for the denoiser UI. All logic that is worth testing lives
 *  in api/state/colormap/overlay/compare; this file only connects it to
 *  the page. */

import { ApiClient, ApiError, SigmaDoc, SigmaEdit } from "./api.js";
import { wipeComposite } from "./compare.js";
import { Channel, legendFor, renderOverlay, sharedScale } from "./overlay.js";
import {
  decodeViewState,
  EditHistory,
  effectiveChannel,
  encodeViewState,
  snapRegion,
  ViewState,
} from "./state.js";

const api = new ApiClient("");
const history = new EditHistory();

let view: ViewState = decodeViewState(location.search.slice(1));
let stages: SigmaDoc[] = [];
let width = 0;
let height = 0;
let noisyPixels: Uint8ClampedArray | null = null;
let resultPixels: Uint8ClampedArray | null = null;
let baseGray: Float32Array | null = null;
let hasRefiltered = false;

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function banner(msg: string | null): void {
  const el = $("banner");
  el.textContent = msg ?? "";
  el.style.display = msg ? "block" : "none";
}

function syncUrl(): void {
  const q = encodeViewState(view);
  window.history.replaceState(null, "", q ? `?${q}` : location.pathname);
}

async function blobToPixels(blob: Blob): Promise<Uint8ClampedArray> {
  const bmp = await createImageBitmap(blob);
  const c = document.createElement("canvas");
  c.width = bmp.width;
  c.height = bmp.height;
  const ctx = c.getContext("2d")!;
  ctx.drawImage(bmp, 0, 0);
  return ctx.getImageData(0, 0, bmp.width, bmp.height).data;
}

function grayOf(rgba: Uint8ClampedArray): Float32Array {
  const g = new Float32Array(rgba.length / 4);
  for (let i = 0; i < g.length; i++) g[i] = rgba[i * 4] / 255;
  return g;
}

function draw(): void {
  if (!noisyPixels || !resultPixels) return;
  const canvas = $("viewer") as unknown as HTMLCanvasElement;
  canvas.width = view.compareMode === "side-by-side" ? width * 2 : width;
  canvas.height = height;
  const ctx = canvas.getContext("2d")!;

  let right = resultPixels;
  const ch = effectiveChannel(view);
  if (ch !== "none" && view.stage !== null && stages[view.stage] && baseGray) {
    const scale = sharedScale(stages, ch as Channel);
    right = renderOverlay(
      baseGray, width, height, stages[view.stage], ch as Channel, scale, view.opacity,
    );
    const leg = legendFor(stages[view.stage], ch as Channel, scale);
    $("legend").textContent =
      `${leg.channel} stage ${leg.stage}: ${leg.min.toPrecision(4)} – ${leg.max.toPrecision(4)}`;
  } else {
    $("legend").textContent = "";
  }

  if (view.compareMode === "wipe") {
    const split = Number(($("wipe") as unknown as HTMLInputElement).value) * width / 100;
    const composite = new Uint8ClampedArray(wipeComposite(noisyPixels, right, width, height, split));
    ctx.putImageData(new ImageData(composite, width, height), 0, 0);
  } else {
    ctx.putImageData(new ImageData(new Uint8ClampedArray(noisyPixels), width, height), 0, 0);
    ctx.putImageData(new ImageData(new Uint8ClampedArray(right), width, height), width, 0);
  }
  if (view.region) {
    const [x0, y0, x1, y1] = view.region;
    ctx.strokeStyle = "#ff5050";
    ctx.strokeRect(x0 + 0.5, y0 + 0.5, x1 - x0 - 1, y1 - y0 - 1);
  }
}

async function reloadResult(): Promise<void> {
  if (!view.sessionId) return;
  const variant = hasRefiltered ? "refiltered" : "denoised";
  const img = await api.getResult(view.sessionId, variant);
  width = img.width;
  height = img.height;
  resultPixels = await blobToPixels(img.blob);
  if (!baseGray) baseGray = grayOf(resultPixels);
  draw();
}

async function reloadSigma(): Promise<void> {
  if (!view.sessionId) return;
  stages = [];
  for (let s = 0; ; s++) {
    try {
      stages.push(await api.getSigma(view.sessionId, s));
    } catch (e) {
      if (e instanceof ApiError && e.status === 404) break;
      throw e;
    }
  }
  const sel = $("stage") as unknown as HTMLSelectElement;
  sel.innerHTML = stages.map((_, i) => `<option value="${i}">stage ${i}</option>`).join("");
  if (view.stage === null && stages.length) view.stage = 0;
}

async function onUpload(file: File): Promise<void> {
  banner(null);
  try {
    const sid = await api.createSession(file);
    view = { ...view, sessionId: sid, region: null };
    history.clear();
    hasRefiltered = false;
    syncUrl();
    const bar = $("progress") as unknown as HTMLProgressElement;
    const doc = await api.pollUntilSettled(sid, (d) => {
      bar.max = d.progress.epochs || 1;
      bar.value = d.progress.epoch;
    });
    if (doc.state === "failed") {
      banner(`training failed: ${doc.error}`);
      return;
    }
    noisyPixels = await blobToPixels(file);
    await reloadSigma();
    await reloadResult();
  } catch (e) {
    banner(e instanceof Error ? e.message : String(e));
  }
}

async function applyEdit(): Promise<void> {
  if (!view.sessionId || !view.region || view.stage === null) return;
  const edit: SigmaEdit = {
    stage: view.stage,
    region: view.region,
    multiplier_r: Number(($("mult-r") as unknown as HTMLInputElement).value) || 1,
    multiplier_x: Number(($("mult-x") as unknown as HTMLInputElement).value) || 1,
    multiplier_y: Number(($("mult-y") as unknown as HTMLInputElement).value) || 1,
  };
  try {
    await api.patchSigma(view.sessionId, [edit]);
    history.push(edit);
    await api.refilter(view.sessionId);
    hasRefiltered = true;
    await reloadSigma();
    await reloadResult();
    await updateMetrics();
  } catch (e) {
    banner(e instanceof Error ? e.message : String(e));
  }
}

async function undoEdit(): Promise<void> {
  if (!view.sessionId) return;
  const remaining = history.undo();
  await api.patchSigma(view.sessionId, { reset: true });
  if (remaining.length) await api.patchSigma(view.sessionId, remaining);
  await api.refilter(view.sessionId);
  hasRefiltered = true;
  await reloadSigma();
  await reloadResult();
}

async function resetEdits(): Promise<void> {
  if (!view.sessionId) return;
  history.clear();
  await api.patchSigma(view.sessionId, { reset: true });
  await api.refilter(view.sessionId);
  hasRefiltered = true;
  await reloadSigma();
  await reloadResult();
}

function parseRoi(s: string): [number, number, number, number] | null {
  const v = s.split(",").map(Number);
  return v.length === 4 && v.every(Number.isFinite)
    ? (v as [number, number, number, number])
    : null;
}

async function updateMetrics(): Promise<void> {
  if (!view.sessionId) return;
  const sig = parseRoi(($("roi-signal") as unknown as HTMLInputElement).value);
  const bg = parseRoi(($("roi-bg") as unknown as HTMLInputElement).value);
  const out = $("metrics");
  if (!sig || !bg) {
    out.textContent = "draw two ROIs (x0,y0,x1,y1)";
    return;
  }
  try {
    const m = await api.getMetrics(view.sessionId, sig, bg);
    out.textContent =
      `CNR input ${m.cnr_input.toFixed(3)} | denoised ${m.cnr_denoised.toFixed(3)}` +
      ` | refiltered ${m.cnr_refiltered.toFixed(3)}`;
  } catch (e) {
    out.textContent = e instanceof Error ? e.message : String(e);
  }
}

function wireRegionSelection(): void {
  const canvas = $("viewer") as unknown as HTMLCanvasElement;
  let start: [number, number] | null = null;
  canvas.addEventListener("mousedown", (ev) => {
    const r = canvas.getBoundingClientRect();
    start = [ev.clientX - r.left, ev.clientY - r.top];
  });
  canvas.addEventListener("mouseup", (ev) => {
    if (!start || !stages.length) return;
    const r = canvas.getBoundingClientRect();
    const P = stages[0].patch_size;
    view.region = snapRegion(
      start[0], start[1], ev.clientX - r.left, ev.clientY - r.top, P, width, height,
    );
    start = null;
    syncUrl();
    draw();
  });
}

export function init(): void {
  ($("file") as unknown as HTMLInputElement).addEventListener("change", (ev) => {
    const f = (ev.target as HTMLInputElement).files?.[0];
    if (f) void onUpload(f);
  });
  ($("stage") as unknown as HTMLSelectElement).addEventListener("change", (ev) => {
    view.stage = Number((ev.target as HTMLSelectElement).value);
    syncUrl();
    draw();
  });
  ($("channel") as unknown as HTMLSelectElement).addEventListener("change", (ev) => {
    view.channel = (ev.target as HTMLSelectElement).value as ViewState["channel"];
    syncUrl();
    draw();
  });
  ($("opacity") as unknown as HTMLInputElement).addEventListener("input", (ev) => {
    view.opacity = Number((ev.target as HTMLInputElement).value) / 100;
    syncUrl();
    draw();
  });
  ($("compare") as unknown as HTMLSelectElement).addEventListener("change", (ev) => {
    view.compareMode = (ev.target as HTMLSelectElement).value as ViewState["compareMode"];
    syncUrl();
    draw();
  });
  ($("wipe") as unknown as HTMLInputElement).addEventListener("input", draw);
  $("apply").addEventListener("click", () => void applyEdit());
  $("undo").addEventListener("click", () => void undoEdit());
  $("reset").addEventListener("click", () => void resetEdits());
  $("metrics-go").addEventListener("click", () => void updateMetrics());
  wireRegionSelection();
  syncUrl();
}

if (typeof document !== "undefined" && document.getElementById("viewer")) {
  init();
}
