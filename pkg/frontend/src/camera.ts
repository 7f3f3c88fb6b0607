/** Orbit camera around a fixed center (the scene-bounds center). */

export interface CameraMessage {
  type: "SetCamera";
  position: [number, number, number];
  look_at: [number, number, number];
  up: [number, number, number];
  fov_y_deg: number;
}

const ELEVATION_LIMIT = (89 * Math.PI) / 180;

export class OrbitCamera {
  azimuth: number;
  elevation: number;
  distance: number;

  constructor(public center: [number, number, number], distance: number,
              public fovYDeg: number = 40,
              azimuth: number = 0.8, elevation: number = 0.5) {
    this.distance = Math.max(distance, 1e-6);
    this.azimuth = azimuth;
    this.elevation = clampElevation(elevation);
  }

  /** Orbit around the scene-bounds center, starting from the pose the
   * server rendered with. */
  static fromHello(hello: {
    camera: { position: number[]; fov_y_deg: number };
    bounds: { lo: number[]; hi: number[] };
  }): OrbitCamera {
    const center: [number, number, number] = [0, 1, 2].map(
      (i) => (hello.bounds.lo[i] + hello.bounds.hi[i]) / 2) as
      [number, number, number];
    const rel = [0, 1, 2].map((i) => hello.camera.position[i] - center[i]);
    const distance = Math.hypot(rel[0], rel[1], rel[2]);
    const azimuth = Math.atan2(rel[2], rel[0]);
    const elevation = Math.asin(distance > 0 ? rel[1] / distance : 0);
    return new OrbitCamera(center, distance, hello.camera.fov_y_deg,
                           azimuth, elevation);
  }

  /** Mouse-drag deltas in pixels to angle changes. */
  rotate(dxPixels: number, dyPixels: number): void {
    this.azimuth += dxPixels * 0.01;
    this.elevation = clampElevation(this.elevation + dyPixels * 0.01);
  }

  /** Positive steps zoom out, negative zoom in (multiplicative). */
  zoom(steps: number): void {
    this.distance = Math.max(this.distance * Math.pow(1.15, steps), 1e-6);
  }

  position(): [number, number, number] {
    const ce = Math.cos(this.elevation);
    return [
      this.center[0] + this.distance * ce * Math.cos(this.azimuth),
      this.center[1] + this.distance * Math.sin(this.elevation),
      this.center[2] + this.distance * ce * Math.sin(this.azimuth),
    ];
  }

  toMessage(): CameraMessage {
    return {
      type: "SetCamera",
      position: this.position(),
      look_at: [...this.center] as [number, number, number],
      up: [0, 1, 0],
      fov_y_deg: this.fovYDeg,
    };
  }
}

function clampElevation(v: number): number {
  return Math.min(Math.max(v, -ELEVATION_LIMIT), ELEVATION_LIMIT);
}
