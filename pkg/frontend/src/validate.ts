// Mirror of the server-side layout validation: same checks, same
// ordering (layout-wide first, then per box by id), so the editor can
// show violations inline before a request is made.

import { LayoutState } from "./types.js";

const HALF_PI = Math.PI / 2;

export function validateLayout(layout: LayoutState): string[] {
  const violations: string[] = [];
  if (layout.boxes.length === 0) violations.push("no boxes");

  const ids = layout.boxes.map((b) => b.id);
  const dup = [...new Set(ids.filter((id, i) => ids.indexOf(id) !== i))].sort((a, b) => a - b);
  dup.forEach((id) => violations.push(`duplicate id ${id}`));

  const cam = layout.camera;
  if (!(cam.radius > 0)) violations.push(`camera radius ${cam.radius} must be > 0`);
  if (!(cam.elevation >= 0 && cam.elevation <= HALF_PI)) {
    violations.push(`camera elevation ${cam.elevation} outside [0, pi/2]`);
  }
  if (!(cam.fov_deg > 10 && cam.fov_deg < 120)) {
    violations.push(`camera fov_deg ${cam.fov_deg} outside (10, 120)`);
  }
  if (cam.width <= 0 || cam.height <= 0) {
    violations.push(`image size ${cam.width}x${cam.height} must be positive`);
  }

  const nTokens = layout.prompt.split(/\s+/).filter((t) => t.length).length;
  const spans: [number, number, number][] = [];
  [...layout.boxes]
    .sort((a, b) => a.id - b.id)
    .forEach((box) => {
      const tag = `box ${box.id}`;
      if (box.dims.some((d) => d <= 0)) {
        violations.push(`${tag}: dims must be componentwise > 0`);
      }
      if (box.center[2] < 0 && !box.levitating) {
        violations.push(`${tag}: center.z ${box.center[2]} < 0 for a non-levitating box`);
      }
      if (![...box.center, ...box.dims, box.yaw].every(Number.isFinite)) {
        violations.push(`${tag}: non-finite geometry`);
      }
      const [start, end] = box.noun_span;
      if (!(start >= 0 && start < end && end <= nTokens)) {
        violations.push(`${tag}: noun_span [${start}, ${end}) not within ${nTokens} prompt tokens`);
      } else {
        spans.push([start, end, box.id]);
      }
    });

  spans.sort((a, b) => a[0] - b[0]);
  for (let i = 1; i < spans.length; i++) {
    if (spans[i][0] < spans[i - 1][1]) {
      violations.push(`noun_span of box ${spans[i - 1][2]} overlaps noun_span of box ${spans[i][2]}`);
    }
  }
  return violations;
}
