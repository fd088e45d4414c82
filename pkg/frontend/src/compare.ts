/** Noisy/denoised comparison compositing.
 *
 * In wipe mode every x-column comes wholly from one variant: columns left
 * of the split from A, columns at or right of it from B. No blending.
 */

export function wipeComposite(
  a: Uint8ClampedArray,
  b: Uint8ClampedArray,
  width: number,
  height: number,
  splitX: number,
): Uint8ClampedArray {
  if (a.length !== width * height * 4 || b.length !== a.length) {
    throw new Error("wipeComposite: buffer sizes do not match dimensions");
  }
  const split = Math.min(width, Math.max(0, Math.round(splitX)));
  const out = new Uint8ClampedArray(a.length);
  for (let y = 0; y < height; y++) {
    const row = y * width * 4;
    out.set(a.subarray(row, row + split * 4), row);
    out.set(b.subarray(row + split * 4, row + width * 4), row + split * 4);
  }
  return out;
}

/** Which variant owns column x under a given split. */
export function sourceAt(x: number, splitX: number): "a" | "b" {
  return x < Math.round(splitX) ? "a" : "b";
}
