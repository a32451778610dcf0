/** Estimate-curve rendering.  Pure drawing onto a 2D-context-shaped object:
 * the controller supplies points straight from GET /curve and no metric math
 * happens here (or anywhere else client-side).
 */

import type { CurvePoint } from "./api.js";

/** The slice of CanvasRenderingContext2D the chart needs; tests can pass a
 * recording stub. */
export interface ChartContext {
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface ChartLayout {
  /** Pixel position for a (labels_used, estimate) pair. */
  toPixel(labelsUsed: number, estimate: number): { x: number; y: number };
  xMax: number;
  yMin: number;
  yMax: number;
}

const PAD = { left: 44, right: 12, top: 12, bottom: 28 };

export function layoutCurve(
  width: number,
  height: number,
  points: readonly CurvePoint[],
  budget: number,
): ChartLayout {
  const xMax = Math.max(budget, ...points.map((p) => p.labels_used), 1);
  let yMin = Math.min(0, ...points.map((p) => p.estimate));
  let yMax = Math.max(1, ...points.map((p) => p.estimate));
  if (yMax === yMin) yMax = yMin + 1;
  const innerW = Math.max(width - PAD.left - PAD.right, 1);
  const innerH = Math.max(height - PAD.top - PAD.bottom, 1);
  return {
    xMax,
    yMin,
    yMax,
    toPixel(labelsUsed: number, estimate: number) {
      return {
        x: PAD.left + (labelsUsed / xMax) * innerW,
        y: PAD.top + (1 - (estimate - yMin) / (yMax - yMin)) * innerH,
      };
    },
  };
}

export function drawCurve(
  ctx: ChartContext,
  width: number,
  height: number,
  points: readonly CurvePoint[],
  budget: number,
  metric: string,
): void {
  ctx.clearRect(0, 0, width, height);
  const layout = layoutCurve(width, height, points, budget);

  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.beginPath();
  const origin = layout.toPixel(0, layout.yMin);
  const topLeft = layout.toPixel(0, layout.yMax);
  const bottomRight = layout.toPixel(layout.xMax, layout.yMin);
  ctx.moveTo(topLeft.x, topLeft.y);
  ctx.lineTo(origin.x, origin.y);
  ctx.lineTo(bottomRight.x, bottomRight.y);
  ctx.stroke();

  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  for (const tick of [layout.yMin, (layout.yMin + layout.yMax) / 2, layout.yMax]) {
    const pos = layout.toPixel(0, tick);
    ctx.fillText(tick.toFixed(2), 4, pos.y + 4);
  }
  ctx.fillText("0", origin.x - 3, height - 8);
  ctx.fillText(String(layout.xMax), bottomRight.x - 14, height - 8);
  ctx.fillText(`${metric} estimate vs labels used`, PAD.left + 8, PAD.top + 4);

  if (points.length === 0) return;

  ctx.strokeStyle = "#2563eb";
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((point, i) => {
    const pos = layout.toPixel(point.labels_used, point.estimate);
    if (i === 0) ctx.moveTo(pos.x, pos.y);
    else ctx.lineTo(pos.x, pos.y);
  });
  ctx.stroke();

  ctx.fillStyle = "#2563eb";
  for (const point of points) {
    const pos = layout.toPixel(point.labels_used, point.estimate);
    ctx.beginPath();
    ctx.arc(pos.x, pos.y, 3, 0, Math.PI * 2);
    ctx.fill();
  }

  const last = points[points.length - 1];
  if (last !== undefined) {
    const pos = layout.toPixel(last.labels_used, last.estimate);
    ctx.fillStyle = "#111";
    ctx.fillText(last.estimate.toFixed(4), Math.min(pos.x + 6, width - 48), pos.y - 6);
  }
}
