/** Canvas rendering: attribute-styled shapes per region plus overlays. */

import type { RegionDoc, SceneDoc } from "./types.js";
import type { Overlays } from "./viewmodel.js";

const ROUND_CATEGORIES = new Set([
  "ball", "apple", "bowl", "plate", "clock", "pot", "pan",
]);
const TALL_CATEGORIES = new Set([
  "bottle", "cup", "vase", "can", "candle", "lamp", "brush",
]);

const CSS_COLORS: Record<string, string> = {
  red: "#d9453c", blue: "#3b6fd4", green: "#3d9a4e", yellow: "#e3c53a",
  orange: "#e08b3a", purple: "#8d56c4", pink: "#e096bc", brown: "#8a5f3c",
  black: "#333333", white: "#f2f2ee", grey: "#9a9a9a", beige: "#d9c6a5",
  teal: "#3aa6a0", maroon: "#8c3344", olive: "#8a8a3d", navy: "#2f4272",
};

function fillFor(region: RegionDoc): string {
  return CSS_COLORS[region.attrs.color] ?? "#bbbbbb";
}

function drawShape(ctx: CanvasRenderingContext2D, region: RegionDoc): void {
  const [x, y, w, h] = region.box;
  ctx.fillStyle = fillFor(region);
  ctx.strokeStyle = "rgba(0,0,0,0.35)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  if (ROUND_CATEGORIES.has(region.attrs.category)) {
    ctx.ellipse(x + w / 2, y + h / 2, w / 2, h / 2, 0, 0, Math.PI * 2);
  } else if (TALL_CATEGORIES.has(region.attrs.category)) {
    const inset = w * 0.18;
    ctx.roundRect(x + inset, y, w - 2 * inset, h, Math.min(4, w / 4));
  } else {
    ctx.roundRect(x, y, w, h, 2);
  }
  ctx.fill();
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.font = "10px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(region.attrs.category, x + w / 2, y + h + 10);
}

function drawBox(ctx: CanvasRenderingContext2D, box: [number, number, number, number],
                 style: { color: string; dashed: boolean; width: number }): void {
  const pad = 3;
  const [x, y, w, h] = box;
  ctx.save();
  ctx.strokeStyle = style.color;
  ctx.lineWidth = style.width;
  ctx.setLineDash(style.dashed ? [6, 4] : []);
  ctx.strokeRect(x - pad, y - pad, w + 2 * pad, h + 2 * pad);
  ctx.restore();
}

/** Draw the scene plus overlays; red = selected, blue dashed = candidates,
 * the question target gets a heavier dash. */
export function renderScene(ctx: CanvasRenderingContext2D, scene: SceneDoc,
                            overlays: Overlays): void {
  ctx.clearRect(0, 0, scene.image.w, scene.image.h);
  ctx.fillStyle = "#f7f4ec";
  ctx.fillRect(0, 0, scene.image.w, scene.image.h);

  const byId = new Map(scene.regions.map((r) => [r.id, r]));
  for (const region of scene.regions) drawShape(ctx, region);

  for (const id of overlays.candidates) {
    const region = byId.get(id);
    if (!region) continue;
    const emphasized = id === overlays.emphasized;
    drawBox(ctx, region.box, {
      color: "#2b6cdf",
      dashed: true,
      width: emphasized ? 3.5 : 1.5,
    });
  }
  if (overlays.selected) {
    const region = byId.get(overlays.selected);
    if (region) drawBox(ctx, region.box, { color: "#d21f1f", dashed: false, width: 3 });
  }
}
