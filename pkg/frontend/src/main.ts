// DOM wiring for the layout studio: edit panel, camera sliders, live
// preview, import/export, and procgen suggestions.

import { ApiClient } from "./api.js";
import { GroundCanvas } from "./canvas.js";
import { exportLayoutText, layoutHash } from "./layout.js";
import { PreviewScheduler } from "./preview.js";
import {
  ActionResult,
  BoxField,
  CameraField,
  EditorState,
  addBoxFromTemplate,
  commitDrag,
  deleteBox,
  initialState,
  loadLayout,
  redo,
  selectBox,
  setBoxField,
  setCameraField,
  translateBoxLive,
  undo,
} from "./state.js";
import { AssetTemplate, LayoutState } from "./types.js";
import { validateLayout } from "./validate.js";

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const api = new ApiClient();
let state: EditorState = initialState();
let templates: AssetTemplate[] = [];
let suggestAttempt = 0;

const preview = new PreviewScheduler(
  api,
  {
    onDisplay(display) {
      const png = display.response.artifacts["oscr.png"];
      if (png) $("preview-img").setAttribute("src", `data:image/png;base64,${png}`);
      $("offline-banner").style.display = "none";
      refreshStaleFlag();
    },
    onError(message, violations) {
      showViolations(violations ?? [message]);
    },
    onOffline() {
      $("offline-banner").style.display = "block";
    },
  },
  300,
);

function showViolations(violations: string[]): void {
  const el = $("violations");
  el.textContent = violations.join("\n");
  el.style.display = violations.length ? "block" : "none";
}

function refreshStaleFlag(): void {
  $("stale-flag").style.display = preview.isStale(state.layout) ? "inline" : "none";
}

function apply(next: EditorState | ActionResult): void {
  if ("state" in next) {
    if (next.error) {
      $("field-error").textContent = next.error;
      return;
    }
    state = next.state;
  } else {
    state = next;
  }
  $("field-error").textContent = "";
  sync();
}

let canvas: GroundCanvas;

function sync(): void {
  canvas.draw(state.layout, state.selection);
  renderBoxPanel();
  renderCameraPanel();
  const violations = validateLayout(state.layout);
  showViolations(violations);
  if (!violations.length) preview.notify(state.layout);
  refreshStaleFlag();
  $("prompt-view").textContent = state.layout.prompt;
}

function numberField(label: string, value: number, oninput: (v: string) => void, step = 0.1): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "field";
  wrap.textContent = label;
  const input = document.createElement("input");
  input.type = "number";
  input.step = String(step);
  input.value = String(Math.round(value * 1000) / 1000);
  input.addEventListener("change", () => oninput(input.value));
  wrap.appendChild(input);
  return wrap;
}

function renderBoxPanel(): void {
  const panel = $("box-panel");
  panel.innerHTML = "";
  const box = state.layout.boxes.find((b) => b.id === state.selection);
  if (!box) {
    panel.textContent = "no box selected";
    return;
  }
  const set = (field: BoxField) => (v: string | number | boolean) =>
    apply(setBoxField(state, box.id, field, v));

  const labelWrap = document.createElement("label");
  labelWrap.className = "field";
  labelWrap.textContent = "label";
  const labelInput = document.createElement("input");
  labelInput.value = box.label;
  labelInput.addEventListener("change", () => set("label")(labelInput.value));
  labelWrap.appendChild(labelInput);
  panel.appendChild(labelWrap);

  (["x", "y", "z"] as const).forEach((axis, i) => {
    panel.appendChild(numberField(`center ${axis}`, box.center[i], set(`center.${axis}` as BoxField)));
  });
  (["x", "y", "z"] as const).forEach((axis, i) => {
    panel.appendChild(numberField(`dims ${axis}`, box.dims[i], set(`dims.${axis}` as BoxField)));
  });

  const yawWrap = document.createElement("label");
  yawWrap.className = "field";
  yawWrap.textContent = `yaw ${(box.yaw * 180 / Math.PI).toFixed(0)} deg`;
  const dial = document.createElement("input");
  dial.type = "range";
  dial.min = "0";
  dial.max = String(Math.PI * 2);
  dial.step = "0.01";
  dial.value = String(box.yaw);
  dial.addEventListener("input", () => set("yaw")(Number(dial.value)));
  yawWrap.appendChild(dial);
  panel.appendChild(yawWrap);

  const lev = document.createElement("label");
  lev.className = "field checkbox";
  const levInput = document.createElement("input");
  levInput.type = "checkbox";
  levInput.checked = Boolean(box.levitating);
  levInput.addEventListener("change", () => set("levitating")(levInput.checked));
  lev.appendChild(levInput);
  lev.appendChild(document.createTextNode(" levitating"));
  panel.appendChild(lev);

  const del = document.createElement("button");
  del.textContent = "delete box";
  del.addEventListener("click", () => apply(deleteBox(state, box.id)));
  panel.appendChild(del);
}

function renderCameraPanel(): void {
  const panel = $("camera-panel");
  panel.innerHTML = "";
  const cam = state.layout.camera;
  const set = (field: CameraField) => (v: string) => apply(setCameraField(state, field, v));
  const slider = (label: string, field: CameraField, value: number, min: number, max: number, step: number) => {
    const wrap = document.createElement("label");
    wrap.className = "field";
    wrap.textContent = `${label} ${value.toFixed(2)}`;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(min);
    input.max = String(max);
    input.step = String(step);
    input.value = String(value);
    input.addEventListener("input", () => set(field)(input.value));
    wrap.appendChild(input);
    panel.appendChild(wrap);
  };
  slider("azimuth", "azimuth", cam.azimuth, 0, Math.PI * 2 - 0.001, 0.01);
  slider("elevation", "elevation", cam.elevation, 0, Math.PI / 2 - 0.02, 0.01);
  slider("radius", "radius", cam.radius, 2, 15, 0.1);
  slider("fov", "fov_deg", cam.fov_deg, 15, 110, 1);
}

function wireToolbar(): void {
  const select = $("template-select") as HTMLSelectElement;
  $("add-box").addEventListener("click", () => {
    const t = templates[select.selectedIndex];
    if (t) apply(addBoxFromTemplate(state, t));
  });
  $("undo").addEventListener("click", () => apply(undo(state)));
  $("redo").addEventListener("click", () => apply(redo(state)));

  $("export").addEventListener("click", () => {
    const blob = new Blob([exportLayoutText(state.layout)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "layout.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  const fileInput = $("import-file") as HTMLInputElement;
  $("import").addEventListener("click", () => fileInput.click());
  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      apply(loadLayout(state, JSON.parse(await file.text())));
    } catch (err) {
      showViolations([err instanceof Error ? err.message : String(err)]);
    }
    fileInput.value = "";
  });

  $("suggest").addEventListener("click", async () => {
    try {
      const seed = Number(($("suggest-seed") as HTMLInputElement).value) || 0;
      const { layout, accept } = await api.procgen(seed, suggestAttempt++);
      apply(loadLayout(state, layout));
      const note = accept.verdict === "accepted"
        ? "suggestion accepted by the dataset filter"
        : `suggestion would be rejected: ${accept.reason} (${accept.detail ?? ""})`;
      $("suggest-note").textContent = note;
    } catch {
      $("offline-banner").style.display = "block";
    }
  });
}

let dragBefore: LayoutState | null = null;

async function boot(): Promise<void> {
  canvas = new GroundCanvas($("ground") as HTMLCanvasElement, {
    onSelect: (id) => apply(selectBox(state, id)),
    onDrag: (id, x, y) => {
      if (dragBefore === null) dragBefore = state.layout;
      apply(translateBoxLive(state, id, x, y));
    },
    onDragEnd: () => {
      if (dragBefore !== null) {
        apply(commitDrag(state, dragBefore));
        dragBefore = null;
      }
    },
  });
  wireToolbar();
  try {
    templates = await api.templates();
    const select = $("template-select") as HTMLSelectElement;
    templates.forEach((t) => {
      const opt = document.createElement("option");
      opt.textContent = `${t.label} (${t.dims.map((d) => d.toFixed(1)).join(" x ")})`;
      select.appendChild(opt);
    });
  } catch {
    $("offline-banner").style.display = "block";
  }
  sync();
}

void boot();
