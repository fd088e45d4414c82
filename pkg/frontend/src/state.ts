/** View state: everything needed to reproduce a view is URL-encodable.
 *
 * Regions are pixel rectangles [x0, y0, x1, y1] (ends exclusive) snapped
 * to the patch grid, because sigma edits are per-patch by contract.
 */

import type { SigmaEdit } from "./api.js";

export type OverlayChannel = "sigma_r" | "sigma_x" | "sigma_y" | "none";
export type CompareMode = "side-by-side" | "wipe";

export interface ViewState {
  sessionId: string | null;
  stage: number | null;
  channel: OverlayChannel;
  opacity: number; // 0..1
  region: [number, number, number, number] | null;
  compareMode: CompareMode;
}

export const DEFAULT_VIEW: ViewState = {
  sessionId: null,
  stage: null,
  channel: "none",
  opacity: 0.5,
  region: null,
  compareMode: "side-by-side",
};

const CHANNELS: OverlayChannel[] = ["sigma_r", "sigma_x", "sigma_y", "none"];

/** The overlay renders only when a stage is selected. */
export function effectiveChannel(s: ViewState): OverlayChannel {
  return s.stage === null ? "none" : s.channel;
}

export function encodeViewState(s: ViewState): string {
  const p = new URLSearchParams();
  if (s.sessionId) p.set("s", s.sessionId);
  if (s.stage !== null) p.set("stage", String(s.stage));
  if (s.channel !== "none") p.set("ch", s.channel);
  if (s.opacity !== DEFAULT_VIEW.opacity) p.set("op", s.opacity.toFixed(2));
  if (s.region) p.set("r", s.region.join(","));
  if (s.compareMode !== "side-by-side") p.set("cmp", s.compareMode);
  return p.toString();
}

export function decodeViewState(query: string): ViewState {
  const p = new URLSearchParams(query);
  const region = p.get("r")?.split(",").map(Number);
  const ch = p.get("ch");
  return {
    sessionId: p.get("s"),
    stage: p.has("stage") ? Number(p.get("stage")) : null,
    channel: ch && CHANNELS.includes(ch as OverlayChannel) ? (ch as OverlayChannel) : "none",
    opacity: p.has("op") ? Math.min(1, Math.max(0, Number(p.get("op")))) : DEFAULT_VIEW.opacity,
    region:
      region && region.length === 4 && region.every(Number.isFinite)
        ? (region as [number, number, number, number])
        : null,
    compareMode: p.get("cmp") === "wipe" ? "wipe" : "side-by-side",
  };
}

/** Snap a dragged rectangle outward to the patch grid and clip it to the
 *  image bounds. Returns null if it collapses to an empty region. */
export function snapRegion(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  patchSize: number,
  width: number,
  height: number,
): [number, number, number, number] | null {
  const lo = (v: number) => Math.floor(v / patchSize) * patchSize;
  const hi = (v: number) => Math.ceil(v / patchSize) * patchSize;
  const sx0 = Math.max(0, lo(Math.min(x0, x1)));
  const sy0 = Math.max(0, lo(Math.min(y0, y1)));
  const sx1 = Math.min(width, hi(Math.max(x0, x1)));
  const sy1 = Math.min(height, hi(Math.max(y0, y1)));
  if (sx0 >= sx1 || sy0 >= sy1) return null;
  return [sx0, sy0, sx1, sy1];
}

/** Undoable edit history. The server applies edits cumulatively, so undo
 *  is implemented by reset + replay of the remaining prefix. */
export class EditHistory {
  private edits: SigmaEdit[] = [];

  push(edit: SigmaEdit): void {
    this.edits.push(edit);
  }

  /** Remove the newest edit; returns the list to replay after a reset. */
  undo(): SigmaEdit[] {
    this.edits.pop();
    return this.list();
  }

  clear(): void {
    this.edits = [];
  }

  list(): SigmaEdit[] {
    return [...this.edits];
  }

  get length(): number {
    return this.edits.length;
  }
}
