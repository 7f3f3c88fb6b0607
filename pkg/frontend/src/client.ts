/**
 * Viewer session: owns the socket, decodes incoming envelopes, drops stale
 * frames, and re-dials with a visible status when the connection drops.
 *
 * The socket is injected as a minimal interface so the session logic is
 * testable without a server.
 */

import {
  Frame, HelloMessage, TAG_FRAME, TAG_JSON, decodeFrame, packJson,
  parseJsonBody, unpackEnvelope,
} from "./protocol.js";

export interface SocketLike {
  send(data: Uint8Array): void;
  close(): void;
  onmessage: ((data: Uint8Array) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionCallbacks {
  onHello?(hello: HelloMessage): void;
  onFrame?(frame: Frame): void;
  onError?(message: string): void;
  onStatus?(status: "connecting" | "connected" | "disconnected"): void;
}

export function browserSocketFactory(url: string): SocketLike {
  const ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  const wrapper: SocketLike = {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onmessage: null,
    onclose: null,
    onopen: null,
  };
  // a refused connection fires only `error` on some implementations, an
  // established one fires `error` then `close`; treat either as terminal
  let done = false;
  const terminal = () => {
    if (!done) {
      done = true;
      wrapper.onclose?.();
    }
  };
  ws.onmessage = (ev) => wrapper.onmessage?.(new Uint8Array(ev.data as ArrayBuffer));
  ws.onclose = terminal;
  ws.onerror = terminal;
  ws.onopen = () => wrapper.onopen?.();
  return wrapper;
}

export class ViewerSession {
  private socket: SocketLike | null = null;
  private lastFrameId = -1;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private url: string, private callbacks: SessionCallbacks,
              private factory: SocketFactory = browserSocketFactory,
              private retryMs = 1500) {}

  connect(): void {
    this.callbacks.onStatus?.("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => this.callbacks.onStatus?.("connected");
    socket.onmessage = (data) => void this.handleMessage(data);
    socket.onclose = () => {
      this.socket = null;
      if (this.closed) {
        return;
      }
      this.callbacks.onStatus?.("disconnected");
      this.retryTimer = setTimeout(() => this.connect(), this.retryMs);
    };
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
    }
    this.socket?.close();
  }

  private async handleMessage(data: Uint8Array): Promise<void> {
    let tag: number;
    let body: Uint8Array;
    try {
      ({ tag, body } = unpackEnvelope(data));
    } catch (err) {
      this.callbacks.onError?.(String(err));
      return;
    }
    if (tag === TAG_JSON) {
      const doc = parseJsonBody(body);
      if (doc.type === "Hello") {
        this.callbacks.onHello?.(doc);
      } else if (doc.type === "Error") {
        this.callbacks.onError?.(doc.message);
      }
      return;
    }
    if (tag === TAG_FRAME) {
      const frame = await decodeFrame(body);
      // frames can decode out of order; never display a stale one
      if (frame.header.frame_id <= this.lastFrameId) {
        return;
      }
      this.lastFrameId = frame.header.frame_id;
      this.callbacks.onFrame?.(frame);
    }
  }

  private sendJson(doc: unknown): void {
    this.socket?.send(packJson(doc));
  }

  sendCamera(message: unknown): void {
    this.sendJson(message);
  }

  sendParams(message: unknown): void {
    this.sendJson(message);
  }

  sendTransferFunction(domain: [number, number], rgba: number[][]): void {
    this.sendJson({ type: "SetTransferFunction", domain, rgba });
  }

  requestFrame(width: number, height: number): void {
    this.sendJson({ type: "RequestFrame", width, height });
  }
}
