// Top-down ground-plane canvas: draws box footprints with yaw and a
// camera marker on its orbit ring; handles click selection and
// drag-translate in world coordinates.

import { BoxState, LayoutState } from "./types.js";

const WORLD_HALF = 8; // meters shown from center to edge

export interface CanvasCallbacks {
  onSelect(boxId: number | null): void;
  onDrag(boxId: number, x: number, y: number): void;
  onDragEnd(): void;
}

function footprint(box: BoxState): [number, number][] {
  const [w, d] = [box.dims[0] / 2, box.dims[1] / 2];
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const local: [number, number][] = [[w, d], [w, -d], [-w, -d], [-w, d]];
  return local.map(([x, y]) => [
    box.center[0] + c * x - s * y,
    box.center[1] + s * x + c * y,
  ]);
}

function pointInFootprint(box: BoxState, x: number, y: number): boolean {
  const dx = x - box.center[0];
  const dy = y - box.center[1];
  const c = Math.cos(-box.yaw);
  const s = Math.sin(-box.yaw);
  const lx = c * dx - s * dy;
  const ly = s * dx + c * dy;
  return Math.abs(lx) <= box.dims[0] / 2 && Math.abs(ly) <= box.dims[1] / 2;
}

export class GroundCanvas {
  private ctx: CanvasRenderingContext2D;
  private dragging: number | null = null;

  constructor(private canvas: HTMLCanvasElement, private callbacks: CanvasCallbacks) {
    this.ctx = canvas.getContext("2d")!;
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", () => this.pointerUp());
    canvas.addEventListener("pointerleave", () => this.pointerUp());
  }

  private toWorld(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const px = ((e.clientX - rect.left) / rect.width) * this.canvas.width;
    const py = ((e.clientY - rect.top) / rect.height) * this.canvas.height;
    const scale = this.canvas.width / (2 * WORLD_HALF);
    return [(px - this.canvas.width / 2) / scale, (this.canvas.height / 2 - py) / scale];
  }

  private toPixel(x: number, y: number): [number, number] {
    const scale = this.canvas.width / (2 * WORLD_HALF);
    return [this.canvas.width / 2 + x * scale, this.canvas.height / 2 - y * scale];
  }

  private pointerDown(e: PointerEvent): void {
    const [x, y] = this.toWorld(e);
    const hit = [...this.lastLayout?.boxes ?? []]
      .reverse()
      .find((b) => pointInFootprint(b, x, y));
    if (hit) {
      this.dragging = hit.id;
      this.callbacks.onSelect(hit.id);
      this.canvas.setPointerCapture(e.pointerId);
    } else {
      this.callbacks.onSelect(null);
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (this.dragging === null) return;
    const [x, y] = this.toWorld(e);
    this.callbacks.onDrag(this.dragging, Math.round(x * 100) / 100, Math.round(y * 100) / 100);
  }

  private pointerUp(): void {
    if (this.dragging !== null) this.callbacks.onDragEnd();
    this.dragging = null;
  }

  private lastLayout: LayoutState | null = null;

  draw(layout: LayoutState, selection: number | null): void {
    this.lastLayout = layout;
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);

    // grid
    ctx.strokeStyle = "#2a2f36";
    ctx.lineWidth = 1;
    for (let m = -WORLD_HALF; m <= WORLD_HALF; m += 1) {
      const [x0, y0] = this.toPixel(m, -WORLD_HALF);
      const [x1, y1] = this.toPixel(m, WORLD_HALF);
      ctx.beginPath(); ctx.moveTo(x0, y0); ctx.lineTo(x1, y1); ctx.stroke();
      const [a0, b0] = this.toPixel(-WORLD_HALF, m);
      const [a1, b1] = this.toPixel(WORLD_HALF, m);
      ctx.beginPath(); ctx.moveTo(a0, b0); ctx.lineTo(a1, b1); ctx.stroke();
    }

    // camera orbit + marker
    const cam = layout.camera;
    const ringR = cam.radius * Math.cos(cam.elevation);
    ctx.strokeStyle = "#4a5568";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    const [cx, cy] = this.toPixel(0, 0);
    ctx.arc(cx, cy, (ringR * canvas.width) / (2 * WORLD_HALF), 0, Math.PI * 2);
    ctx.stroke();
    ctx.setLineDash([]);
    const camX = ringR * Math.cos(cam.azimuth);
    const camY = ringR * Math.sin(cam.azimuth);
    const [mx, my] = this.toPixel(camX, camY);
    ctx.fillStyle = "#f6ad55";
    ctx.beginPath();
    ctx.arc(mx, my, 6, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = "#f6ad55";
    ctx.beginPath();
    ctx.moveTo(mx, my);
    ctx.lineTo(cx, cy);
    ctx.stroke();

    // boxes
    for (const box of layout.boxes) {
      const pts = footprint(box).map(([x, y]) => this.toPixel(x, y));
      ctx.beginPath();
      pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
      ctx.closePath();
      ctx.fillStyle = box.id === selection ? "rgba(99, 179, 237, 0.45)" : "rgba(99, 179, 237, 0.2)";
      ctx.fill();
      ctx.strokeStyle = box.id === selection ? "#63b3ed" : "#4a7dab";
      ctx.lineWidth = box.id === selection ? 2 : 1;
      ctx.stroke();
      // front edge marker (+Y local)
      const [fx0, fy0] = pts[3];
      const [fx1, fy1] = pts[0];
      ctx.strokeStyle = "#68d391";
      ctx.lineWidth = 2.5;
      ctx.beginPath();
      ctx.moveTo(fx0, fy0);
      ctx.lineTo(fx1, fy1);
      ctx.stroke();
      const [lx, ly] = this.toPixel(box.center[0], box.center[1]);
      ctx.fillStyle = "#e2e8f0";
      ctx.font = "11px system-ui";
      ctx.fillText(`${box.id}: ${box.label}`, lx + 6, ly - 6);
    }
  }
}
