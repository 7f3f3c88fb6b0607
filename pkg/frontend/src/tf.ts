/**
 * Transfer-function editing model: a piecewise-linear list of RGBA control
 * points on a normalized [0, 1] axis, resampled to the fixed-size table the
 * renderer consumes before sending.
 */

export interface ControlPoint {
  /** Normalized position in [0, 1]. */
  x: number;
  r: number;
  g: number;
  b: number;
  a: number;
}

export const TABLE_SIZE = 256;

/** Minimum spacing the editor keeps between control points. */
export const MIN_POINT_GAP = 1e-4;

function channel(points: ControlPoint[], key: "r" | "g" | "b" | "a", u: number): number {
  const n = points.length;
  if (u <= points[0].x) {
    return points[0][key];
  }
  if (u >= points[n - 1].x) {
    return points[n - 1][key];
  }
  let j = 0;
  while (j + 1 < n && points[j + 1].x <= u) {
    j += 1;
  }
  const left = points[j];
  const right = points[j + 1];
  const span = right.x - left.x;
  if (span <= 0) {
    return left[key];
  }
  const t = (u - left.x) / span;
  return left[key] + t * (right[key] - left[key]);
}

/**
 * Resample control points to a `size`-entry RGBA table, clamping beyond the
 * first/last point. Matches the renderer's reference resampler.
 */
export function resampleControlPoints(points: ControlPoint[],
                                      size: number = TABLE_SIZE): number[][] {
  if (points.length < 1) {
    throw new Error("need at least one control point");
  }
  const sorted = [...points].sort((p, q) => p.x - q.x);
  const table: number[][] = [];
  for (let i = 0; i < size; i++) {
    const u = i / (size - 1);
    table.push([
      channel(sorted, "r", u),
      channel(sorted, "g", u),
      channel(sorted, "b", u),
      channel(sorted, "a", u),
    ]);
  }
  return table;
}

/** Clamp a dragged point into [0, 1] and keep x strictly between neighbours. */
export function clampDraggedPoint(points: ControlPoint[], index: number,
                                  x: number, a: number): ControlPoint {
  const lo = index > 0 ? points[index - 1].x + MIN_POINT_GAP : 0;
  const hi = index < points.length - 1 ? points[index + 1].x - MIN_POINT_GAP : 1;
  const p = points[index];
  return {
    ...p,
    x: Math.min(Math.max(x, lo), hi),
    a: Math.min(Math.max(a, 0), 1),
  };
}

export function defaultControlPoints(): ControlPoint[] {
  return [
    { x: 0.0, r: 0.0, g: 0.0, b: 1.0, a: 0.0 },
    { x: 0.35, r: 0.0, g: 1.0, b: 1.0, a: 0.15 },
    { x: 0.65, r: 1.0, g: 1.0, b: 0.0, a: 0.35 },
    { x: 1.0, r: 1.0, g: 0.0, b: 0.0, a: 0.6 },
  ];
}
