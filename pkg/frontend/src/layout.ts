// Pure layout operations: prompt composition, schema-exact export and
// import, canonical hashing.

import {
  BoxState,
  CameraState,
  LayoutState,
  normalizeYaw,
} from "./types.js";

const VOWELS = "aeiou";

function article(label: string): string {
  return VOWELS.includes(label[0]?.toLowerCase() ?? "") ? "an" : "a";
}

/** Rebuild the scene prompt from box labels and assign noun spans.
 *  Mirrors the generator's prompt builder so editor layouts always have
 *  consistent spans. */
export function composePrompt(layout: LayoutState): LayoutState {
  const tokens = ["a", "scene", "with"];
  const boxes = layout.boxes.map((b) => ({ ...b }));
  if (boxes.length === 0) {
    return { ...layout, prompt: "an empty scene", boxes };
  }
  boxes.forEach((box, i) => {
    if (i > 0) {
      if (i === boxes.length - 1) tokens.push("and");
      else tokens[tokens.length - 1] += ",";
    }
    tokens.push(article(box.label));
    const words = box.label.split(/\s+/).filter((w) => w.length);
    box.noun_span = [tokens.length, tokens.length + words.length];
    tokens.push(...words);
  });
  return { ...layout, prompt: tokens.join(" "), boxes };
}

const CAMERA_FIELDS = ["radius", "azimuth", "elevation", "fov_deg", "width", "height"];
const BOX_REQUIRED = ["id", "label", "center", "dims", "yaw", "noun_span"];
const BOX_OPTIONAL = ["levitating"];

export class ImportError extends Error {}

function checkFields(
  obj: Record<string, unknown>,
  required: string[],
  optional: string[],
  where: string,
): void {
  const known = new Set([...required, ...optional]);
  const unknown = Object.keys(obj).filter((k) => !known.has(k)).sort();
  if (unknown.length) {
    throw new ImportError(`${where}: unknown field(s) ${unknown.join(", ")}`);
  }
  const missing = required.filter((k) => !(k in obj)).sort();
  if (missing.length) {
    throw new ImportError(`${where}: missing field(s) ${missing.join(", ")}`);
  }
}

function asNumber(v: unknown, where: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ImportError(`${where}: expected a finite number, got ${JSON.stringify(v)}`);
  }
  return v;
}

function asVec3(v: unknown, where: string): [number, number, number] {
  if (!Array.isArray(v) || v.length !== 3) {
    throw new ImportError(`${where}: expected [x, y, z]`);
  }
  return [asNumber(v[0], where), asNumber(v[1], where), asNumber(v[2], where)];
}

/** Parse external layout JSON against the exact schema. Unknown fields
 *  are rejected by name so the user can see the diff. */
export function importLayout(obj: unknown): LayoutState {
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ImportError("layout must be a JSON object");
  }
  const root = obj as Record<string, unknown>;
  checkFields(root, ["prompt", "camera", "boxes"], [], "layout");
  if (typeof root.prompt !== "string") throw new ImportError("layout.prompt must be a string");
  const camObj = root.camera as Record<string, unknown>;
  if (typeof camObj !== "object" || camObj === null) {
    throw new ImportError("layout.camera must be an object");
  }
  checkFields(camObj, CAMERA_FIELDS, [], "camera");
  const camera: CameraState = {
    radius: asNumber(camObj.radius, "camera.radius"),
    azimuth: asNumber(camObj.azimuth, "camera.azimuth"),
    elevation: asNumber(camObj.elevation, "camera.elevation"),
    fov_deg: asNumber(camObj.fov_deg, "camera.fov_deg"),
    width: asNumber(camObj.width, "camera.width"),
    height: asNumber(camObj.height, "camera.height"),
  };
  if (!Array.isArray(root.boxes)) throw new ImportError("layout.boxes must be an array");
  const boxes: BoxState[] = root.boxes.map((raw, i) => {
    const where = `boxes[${i}]`;
    if (typeof raw !== "object" || raw === null) throw new ImportError(`${where} must be an object`);
    const b = raw as Record<string, unknown>;
    checkFields(b, BOX_REQUIRED, BOX_OPTIONAL, where);
    const span = b.noun_span;
    if (!Array.isArray(span) || span.length !== 2) {
      throw new ImportError(`${where}.noun_span: expected [start, end)`);
    }
    const box: BoxState = {
      id: asNumber(b.id, `${where}.id`),
      label: String(b.label),
      center: asVec3(b.center, `${where}.center`),
      dims: asVec3(b.dims, `${where}.dims`),
      yaw: normalizeYaw(asNumber(b.yaw, `${where}.yaw`)),
      noun_span: [asNumber(span[0], `${where}.noun_span`), asNumber(span[1], `${where}.noun_span`)],
    };
    if (b.levitating === true) box.levitating = true;
    return box;
  });
  return { prompt: root.prompt, camera, boxes };
}

/** Serialize in the exact on-disk schema (optional fields only when set). */
export function exportLayout(layout: LayoutState): LayoutState {
  const out: LayoutState = {
    prompt: layout.prompt,
    camera: { ...layout.camera },
    boxes: layout.boxes.map((b) => {
      const box: BoxState = {
        id: b.id,
        label: b.label,
        center: [...b.center],
        dims: [...b.dims],
        yaw: b.yaw,
        noun_span: [...b.noun_span],
      };
      if (b.levitating) box.levitating = true;
      return box;
    }),
  };
  return out;
}

export function exportLayoutText(layout: LayoutState): string {
  return JSON.stringify(exportLayout(layout), null, 2) + "\n";
}

function stableStringify(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(stableStringify).join(",") + "]";
  }
  if (typeof value === "object" && value !== null) {
    const obj = value as Record<string, unknown>;
    const keys = Object.keys(obj).sort();
    return "{" + keys.map((k) => JSON.stringify(k) + ":" + stableStringify(obj[k])).join(",") + "}";
  }
  return JSON.stringify(value);
}

/** FNV-1a hash of the canonical serialization of (layout, flags); the
 *  preview cache key. */
export function layoutHash(layout: LayoutState, flags: Record<string, unknown> = {}): string {
  const text = stableStringify({ layout: exportLayout(layout), flags });
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0");
}
