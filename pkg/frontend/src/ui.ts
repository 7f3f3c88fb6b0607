/**
 * DOM wiring: frame canvas with heatmap overlay toggle, transfer-function
 * editor (draggable alpha control points over the field histogram), camera
 * drag/zoom, parameter sliders with live readouts.
 */

import { OrbitCamera } from "./camera.js";
import { SessionCallbacks, ViewerSession } from "./client.js";
import { Frame, HelloMessage } from "./protocol.js";
import { ParamsState, MODES, Mode } from "./state.js";
import {
  ControlPoint, clampDraggedPoint, defaultControlPoints, resampleControlPoints,
} from "./tf.js";

const POINT_RADIUS = 6;

export class ViewerApp {
  private session: ViewerSession;
  private params = new ParamsState();
  private camera: OrbitCamera | null = null;
  private points: ControlPoint[] = defaultControlPoints();
  private domain: [number, number] = [0, 1];
  private histogram: number[] = [];
  private lastFrame: Frame | null = null;
  private showHeatmap = false;
  private dragIndex = -1;

  private frameCanvas: HTMLCanvasElement;
  private tfCanvas: HTMLCanvasElement;
  private statusBar: HTMLElement;
  private readouts: HTMLElement;
  private fixedStepLabel: HTMLElement;

  constructor(private root: HTMLElement, url: string) {
    this.frameCanvas = this.makeCanvas("frame-view", 512, 512);
    this.tfCanvas = this.makeCanvas("tf-editor", 512, 120);
    this.statusBar = document.createElement("div");
    this.statusBar.className = "status";
    this.readouts = document.createElement("div");
    this.readouts.className = "readouts";
    this.fixedStepLabel = document.createElement("span");

    const callbacks: SessionCallbacks = {
      onHello: (hello) => this.onHello(hello),
      onFrame: (frame) => this.onFrame(frame),
      onError: (message) => this.setStatus(`server error: ${message}`, true),
      onStatus: (status) => {
        if (status === "disconnected") {
          this.setStatus("connection lost, retrying...", true);
        } else if (status === "connected") {
          this.setStatus("connected", false);
        }
      },
    };
    this.session = new ViewerSession(url, callbacks);
    this.buildDom();
    this.session.connect();
  }

  private makeCanvas(cls: string, w: number, h: number): HTMLCanvasElement {
    const canvas = document.createElement("canvas");
    canvas.className = cls;
    canvas.width = w;
    canvas.height = h;
    return canvas;
  }

  private buildDom(): void {
    this.root.append(this.statusBar, this.frameCanvas, this.readouts,
                     this.tfCanvas);
    this.root.append(this.sliderRow("s1", 1e-4, 1.0, () => this.params.s1,
                                    (v) => this.params.setS1(v)));
    this.root.append(this.sliderRow("s2", 1e-4, 4.0, () => this.params.s2,
                                    (v) => this.params.setS2(v)));
    this.root.append(this.sliderRow("p", 1.0, 8.0, () => this.params.p,
                                    (v) => this.params.setP(v)));

    const modeRow = document.createElement("div");
    const select = document.createElement("select");
    for (const mode of MODES) {
      const opt = document.createElement("option");
      opt.value = mode;
      opt.textContent = mode;
      select.append(opt);
    }
    select.value = this.params.mode;
    select.onchange = () => {
      this.params.mode = select.value as Mode;
      this.pushParams();
    };
    const heatToggle = document.createElement("button");
    heatToggle.textContent = "heatmap";
    heatToggle.onclick = () => {
      this.showHeatmap = !this.showHeatmap;
      this.drawFrame();
    };
    modeRow.append(select, heatToggle, this.fixedStepLabel);
    this.root.append(modeRow);

    this.frameCanvas.addEventListener("mousemove", (ev) => {
      if (ev.buttons & 1 && this.camera) {
        this.camera.rotate(ev.movementX, ev.movementY);
        this.session.sendCamera(this.camera.toMessage());
      }
    });
    this.frameCanvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      if (this.camera) {
        this.camera.zoom(Math.sign(ev.deltaY));
        this.session.sendCamera(this.camera.toMessage());
      }
    });

    this.tfCanvas.addEventListener("mousedown", (ev) => this.tfPointer(ev, true));
    this.tfCanvas.addEventListener("mousemove", (ev) => this.tfPointer(ev, false));
    window.addEventListener("mouseup", () => { this.dragIndex = -1; });
  }

  private sliderRow(label: string, min: number, max: number,
                    get: () => number, set: (v: number) => void): HTMLElement {
    const row = document.createElement("div");
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(min);
    input.max = String(max);
    input.step = "any";
    input.value = String(get());
    const value = document.createElement("span");
    value.textContent = get().toFixed(3);
    input.oninput = () => {
      set(Number(input.value));
      input.value = String(get());  // reflect clamping back into the control
      value.textContent = get().toFixed(3);
      this.pushParams();
    };
    const caption = document.createElement("label");
    caption.textContent = label;
    row.append(caption, input, value);
    return row;
  }

  private pushParams(): void {
    this.session.sendParams(this.params.toMessage());
    this.fixedStepLabel.textContent = this.params.fixedStep ? "fixed step" : "adaptive";
  }

  private pushTransferFunction(): void {
    this.session.sendTransferFunction(this.domain,
                                      resampleControlPoints(this.points));
    this.drawTf();
  }

  private onHello(hello: HelloMessage): void {
    this.domain = hello.tf.domain;
    this.histogram = hello.histogram.counts;
    this.camera = OrbitCamera.fromHello(hello);
    this.params = new ParamsState(hello.params.s1, hello.params.s2,
                                  hello.params.p, hello.mode as Mode,
                                  hello.params.termination_opacity);
    this.session.requestFrame(hello.width, hello.height);
    this.drawTf();
    this.pushParams();
  }

  private onFrame(frame: Frame): void {
    this.lastFrame = frame;
    const fps = frame.header.stats.ms > 0 ? 1000 / frame.header.stats.ms : 0;
    this.readouts.textContent =
      `frame ${frame.header.frame_id} | ${fps.toFixed(1)} fps | ` +
      `${frame.header.stats.total_samples.toLocaleString()} samples | ` +
      `${frame.header.stats.partitions_visited_mean.toFixed(2)} partitions/ray`;
    this.drawFrame();
  }

  private drawFrame(): void {
    if (!this.lastFrame) {
      return;
    }
    const { header, rgba, heatmap } = this.lastFrame;
    const payload = this.showHeatmap && heatmap ? heatmap : rgba;
    this.frameCanvas.width = header.width;
    this.frameCanvas.height = header.height;
    const ctx = this.frameCanvas.getContext("2d")!;
    const img = new ImageData(new Uint8ClampedArray(payload), header.width,
                              header.height);
    ctx.putImageData(img, 0, 0);
  }

  private tfPointer(ev: MouseEvent, isDown: boolean): void {
    const rect = this.tfCanvas.getBoundingClientRect();
    const x = (ev.clientX - rect.left) / rect.width;
    const a = 1 - (ev.clientY - rect.top) / rect.height;
    if (isDown) {
      this.dragIndex = this.nearestPoint(x, a);
      if (this.dragIndex < 0 && ev.detail === 2) {
        this.points.push({ x, r: 1, g: 1, b: 1, a: Math.max(a, 0) });
        this.points.sort((p, q) => p.x - q.x);
        this.pushTransferFunction();
      }
      return;
    }
    if (this.dragIndex >= 0 && ev.buttons & 1) {
      this.points[this.dragIndex] =
        clampDraggedPoint(this.points, this.dragIndex, x, a);
      this.pushTransferFunction();
    }
  }

  private nearestPoint(x: number, a: number): number {
    let best = -1;
    let bestDist = (POINT_RADIUS * 2) / this.tfCanvas.width;
    for (let i = 0; i < this.points.length; i++) {
      const d = Math.hypot(this.points[i].x - x, (this.points[i].a - a) * 0.25);
      if (d < bestDist) {
        best = i;
        bestDist = d;
      }
    }
    return best;
  }

  private drawTf(): void {
    const ctx = this.tfCanvas.getContext("2d")!;
    const { width: w, height: h } = this.tfCanvas;
    ctx.clearRect(0, 0, w, h);

    if (this.histogram.length) {
      const peak = Math.max(...this.histogram, 1);
      ctx.fillStyle = "#3a3a46";
      const bar = w / this.histogram.length;
      this.histogram.forEach((count, i) => {
        const bh = (count / peak) * (h - 4);
        ctx.fillRect(i * bar, h - bh, bar, bh);
      });
    }

    const table = resampleControlPoints(this.points, 128);
    ctx.beginPath();
    table.forEach(([, , , a], i) => {
      const px = (i / (table.length - 1)) * w;
      const py = (1 - a) * h;
      if (i === 0) {
        ctx.moveTo(px, py);
      } else {
        ctx.lineTo(px, py);
      }
    });
    ctx.strokeStyle = "#e8e8f0";
    ctx.stroke();

    for (const p of this.points) {
      ctx.beginPath();
      ctx.arc(p.x * w, (1 - p.a) * h, POINT_RADIUS, 0, Math.PI * 2);
      ctx.fillStyle = `rgb(${p.r * 255},${p.g * 255},${p.b * 255})`;
      ctx.fill();
      ctx.strokeStyle = "#fff";
      ctx.stroke();
    }
  }

  private setStatus(text: string, isError: boolean): void {
    this.statusBar.textContent = text;
    this.statusBar.classList.toggle("error", isError);
  }
}
