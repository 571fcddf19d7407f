// Editor state: the working layout, selection, and a bounded undo
// stack. Every action is a pure transition; invalid numeric input
// returns a field error and leaves the state untouched.

import { composePrompt, importLayout } from "./layout.js";
import {
  AssetTemplate,
  BoxState,
  DEFAULT_CAMERA,
  LayoutState,
  normalizeYaw,
} from "./types.js";

export const UNDO_LIMIT = 100;

export interface EditorState {
  layout: LayoutState;
  selection: number | null;
  dirty: boolean;
  undoStack: LayoutState[];
  redoStack: LayoutState[];
}

export interface ActionResult {
  state: EditorState;
  error?: string;
}

export function initialState(): EditorState {
  return {
    layout: composePrompt({ prompt: "", camera: { ...DEFAULT_CAMERA }, boxes: [] }),
    selection: null,
    dirty: false,
    undoStack: [],
    redoStack: [],
  };
}

function cloneLayout(layout: LayoutState): LayoutState {
  return JSON.parse(JSON.stringify(layout)) as LayoutState;
}

function commit(state: EditorState, layout: LayoutState, selection?: number | null): EditorState {
  const undoStack = [...state.undoStack, cloneLayout(state.layout)];
  if (undoStack.length > UNDO_LIMIT) undoStack.shift();
  return {
    layout,
    selection: selection === undefined ? state.selection : selection,
    dirty: true,
    undoStack,
    redoStack: [],
  };
}

export function addBoxFromTemplate(state: EditorState, template: AssetTemplate): EditorState {
  const nextId = state.layout.boxes.reduce((m, b) => Math.max(m, b.id + 1), 0);
  const box: BoxState = {
    id: nextId,
    label: template.label,
    center: [0, 0, template.dims[2] / 2],
    dims: [...template.dims],
    yaw: 0,
    noun_span: [0, 1], // composePrompt rewrites spans
  };
  const layout = composePrompt({ ...state.layout, boxes: [...state.layout.boxes, box] });
  return commit(state, layout, nextId);
}

export function deleteBox(state: EditorState, boxId: number): EditorState {
  const boxes = state.layout.boxes.filter((b) => b.id !== boxId);
  if (boxes.length === state.layout.boxes.length) return state;
  const layout = composePrompt({ ...state.layout, boxes });
  return commit(state, layout, state.selection === boxId ? null : state.selection);
}

export function translateBox(state: EditorState, boxId: number, x: number, y: number): EditorState {
  const boxes = state.layout.boxes.map((b) =>
    b.id === boxId ? { ...b, center: [x, y, b.center[2]] as [number, number, number] } : b,
  );
  return commit(state, { ...state.layout, boxes });
}

/** Drag-in-progress translation: updates the layout without touching
 *  the undo stack. Pair with commitDrag on release. */
export function translateBoxLive(state: EditorState, boxId: number, x: number, y: number): EditorState {
  const boxes = state.layout.boxes.map((b) =>
    b.id === boxId ? { ...b, center: [x, y, b.center[2]] as [number, number, number] } : b,
  );
  return { ...state, layout: { ...state.layout, boxes }, dirty: true };
}

/** Finish a drag: one undo entry for the whole gesture. */
export function commitDrag(state: EditorState, before: LayoutState): EditorState {
  const undoStack = [...state.undoStack, cloneLayout(before)];
  if (undoStack.length > UNDO_LIMIT) undoStack.shift();
  return { ...state, undoStack, redoStack: [], dirty: true };
}

export type BoxField =
  | "center.x" | "center.y" | "center.z"
  | "dims.x" | "dims.y" | "dims.z"
  | "yaw" | "label" | "levitating";

export function setBoxField(
  state: EditorState,
  boxId: number,
  field: BoxField,
  value: string | number | boolean,
): ActionResult {
  const box = state.layout.boxes.find((b) => b.id === boxId);
  if (!box) return { state, error: `no box with id ${boxId}` };

  const next: BoxState = { ...box, center: [...box.center], dims: [...box.dims], noun_span: [...box.noun_span] };
  let relabeled = false;
  if (field === "label") {
    const label = String(value).trim();
    if (!label) return { state, error: "label must not be empty" };
    next.label = label;
    relabeled = true;
  } else if (field === "levitating") {
    if (value) next.levitating = true;
    else delete next.levitating;
  } else {
    const num = typeof value === "number" ? value : Number(value);
    if (!Number.isFinite(num)) return { state, error: `${field}: not a number` };
    if (field === "yaw") next.yaw = normalizeYaw(num);
    else {
      const [group, axis] = field.split(".") as ["center" | "dims", string];
      const idx = { x: 0, y: 1, z: 2 }[axis]!;
      if (group === "dims" && num <= 0) return { state, error: `${field}: must be > 0` };
      next[group][idx] = num;
    }
  }
  let layout: LayoutState = {
    ...state.layout,
    boxes: state.layout.boxes.map((b) => (b.id === boxId ? next : b)),
  };
  if (relabeled) layout = composePrompt(layout);
  return { state: commit(state, layout) };
}

export type CameraField = "radius" | "azimuth" | "elevation" | "fov_deg" | "width" | "height";

export function setCameraField(state: EditorState, field: CameraField, value: string | number): ActionResult {
  const num = typeof value === "number" ? value : Number(value);
  if (!Number.isFinite(num)) return { state, error: `${field}: not a number` };
  const camera = { ...state.layout.camera, [field]: field === "azimuth" ? normalizeYaw(num) : num };
  return { state: commit(state, { ...state.layout, camera }) };
}

export function selectBox(state: EditorState, boxId: number | null): EditorState {
  return { ...state, selection: boxId };
}

export function loadLayout(state: EditorState, raw: unknown): ActionResult {
  try {
    const layout = importLayout(raw);
    return { state: { ...commit(state, layout, null), dirty: false } };
  } catch (err) {
    return { state, error: err instanceof Error ? err.message : String(err) };
  }
}

export function undo(state: EditorState): EditorState {
  if (!state.undoStack.length) return state;
  const undoStack = [...state.undoStack];
  const layout = undoStack.pop()!;
  return {
    ...state,
    layout,
    selection: null,
    undoStack,
    redoStack: [...state.redoStack, cloneLayout(state.layout)],
  };
}

export function redo(state: EditorState): EditorState {
  if (!state.redoStack.length) return state;
  const redoStack = [...state.redoStack];
  const layout = redoStack.pop()!;
  return {
    ...state,
    layout,
    selection: null,
    redoStack,
    undoStack: [...state.undoStack, cloneLayout(state.layout)],
  };
}
