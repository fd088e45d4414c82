/** Colormap for sigma heatmaps.
 *
 * A perceptually ordered dark-blue -> teal -> yellow ramp (viridis-like,
 * 8 linearly interpolated control points). Values are normalized by an
 * explicit [min, max] scale so callers control the legend endpoints.
 */

export type Rgb = [number, number, number];

const STOPS: Rgb[] = [
  [68, 1, 84],
  [70, 50, 127],
  [54, 92, 141],
  [39, 127, 142],
  [31, 161, 135],
  [74, 194, 109],
  [159, 218, 58],
  [253, 231, 37],
];

/** Map t in [0,1] onto the ramp (clamped). */
export function ramp(t: number): Rgb {
  const u = Math.min(1, Math.max(0, t)) * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(u));
  const f = u - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** Color for a value under a [min, max] scale; a degenerate scale
 *  (min === max) maps everything to the midpoint color. */
export function mapToColor(value: number, min: number, max: number): Rgb {
  if (max <= min) return ramp(0.5);
  return ramp((value - min) / (max - min));
}
