/** Sigma-map overlay rendering.
 *
 * Per-patch blocks are colored through the shared colormap. The color
 * scale for a given channel is shared across all stages of a session, so
 * two legends for the same channel always show identical min/max
 * endpoints.
 */

import type { SigmaDoc } from "./api.js";
import { mapToColor } from "./colormap.js";

export type Channel = "sigma_r" | "sigma_x" | "sigma_y";

export interface ColorScale {
  min: number;
  max: number;
}

function channelValues(doc: SigmaDoc, channel: Channel, edited: boolean): number[] {
  return edited ? doc.edited[channel] : doc[channel];
}

/** Shared [min, max] for one channel across every stage of the session.
 *  Both base and edited values are included so edits never clip. */
export function sharedScale(stages: SigmaDoc[], channel: Channel): ColorScale {
  let min = Infinity;
  let max = -Infinity;
  for (const doc of stages) {
    for (const edited of [false, true]) {
      for (const v of channelValues(doc, channel, edited)) {
        if (v < min) min = v;
        if (v > max) max = v;
      }
    }
  }
  if (!Number.isFinite(min)) return { min: 0, max: 1 };
  return { min, max };
}

export interface Legend {
  channel: Channel;
  stage: number;
  min: number;
  max: number;
}

export function legendFor(doc: SigmaDoc, channel: Channel, scale: ColorScale): Legend {
  return { channel, stage: doc.stage, min: scale.min, max: scale.max };
}

/** Composite the overlay onto a grayscale base image.
 *
 * base: width*height grayscale values in [0,1] (row-major).
 * Returns an RGBA byte buffer. opacity 0 reproduces the base exactly.
 */
export function renderOverlay(
  base: Float32Array | number[],
  width: number,
  height: number,
  doc: SigmaDoc,
  channel: Channel,
  scale: ColorScale,
  opacity: number,
  edited = true,
): Uint8ClampedArray {
  const values = channelValues(doc, channel, edited);
  const [gh, gw] = doc.grid;
  const P = doc.patch_size;
  const out = new Uint8ClampedArray(width * height * 4);
  const a = Math.min(1, Math.max(0, opacity));
  for (let y = 0; y < height; y++) {
    const gy = Math.min(gh - 1, Math.floor(y / P));
    for (let x = 0; x < width; x++) {
      const gx = Math.min(gw - 1, Math.floor(x / P));
      const g = Math.round(Math.min(1, Math.max(0, base[y * width + x])) * 255);
      const [r, gg, b] = mapToColor(values[gy * gw + gx], scale.min, scale.max);
      const o = (y * width + x) * 4;
      out[o] = Math.round((1 - a) * g + a * r);
      out[o + 1] = Math.round((1 - a) * g + a * gg);
      out[o + 2] = Math.round((1 - a) * g + a * b);
      out[o + 3] = 255;
    }
  }
  return out;
}
