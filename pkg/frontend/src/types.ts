// Client-side mirror of the server layout schema. Field names and JSON
// shape must match the service exactly; the exporter round-trips
// byte-compatibly through the server parser.

export interface CameraState {
  radius: number;
  azimuth: number;
  elevation: number;
  fov_deg: number;
  width: number;
  height: number;
}

export interface BoxState {
  id: number;
  label: string;
  center: [number, number, number];
  dims: [number, number, number];
  yaw: number;
  noun_span: [number, number];
  levitating?: boolean;
}

export interface LayoutState {
  prompt: string;
  camera: CameraState;
  boxes: BoxState[];
}

export interface AssetTemplate {
  label: string;
  dims: [number, number, number];
}

export interface RenderInfo {
  mode: string;
  empty: boolean;
  overlaps?: { a: number; b: number; pixels: number }[];
}

export interface RenderResponse {
  v: number;
  info: RenderInfo;
  artifacts: Record<string, string>; // name -> base64
}

export interface AcceptReport {
  verdict: string;
  reason: string | null;
  detail: string | null;
  boxes: { box_id: number; visibility: number | null; bbox_side_frac: number | null }[];
}

export const TWO_PI = Math.PI * 2;

export function normalizeYaw(yaw: number): number {
  let y = yaw % TWO_PI;
  if (y < 0) y += TWO_PI;
  if (y >= TWO_PI) y -= TWO_PI;
  return y;
}

export const DEFAULT_CAMERA: CameraState = {
  radius: 6.0,
  azimuth: 0.8,
  elevation: 0.35,
  fov_deg: 65.0,
  width: 512,
  height: 512,
};
