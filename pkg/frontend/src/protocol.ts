/**
 * Wire protocol for the viewer service.
 *
 * Every WebSocket binary message is one envelope:
 *   u8 type tag | u32 little-endian body length | body
 * Tag 1 carries UTF-8 JSON control messages in both directions; tag 2
 * carries a frame: u32 LE header length, header JSON, then the RGBA pixel
 * payload and an optional RGBA heatmap payload (zlib-deflated when
 * negotiated via the Hello message).
 */

export const TAG_JSON = 1;
export const TAG_FRAME = 2;

export interface FrameStats {
  ms: number;
  total_samples: number;
  partitions_visited_mean: number;
}

export interface FrameHeader {
  frame_id: number;
  width: number;
  height: number;
  stats: FrameStats;
  heatmap: boolean;
  compression: "none" | "deflate";
  rgba_bytes: number;
  heatmap_bytes: number;
}

export interface HelloMessage {
  type: "Hello";
  protocol: number;
  width: number;
  height: number;
  mode: string;
  params: { s1: number; s2: number; p: number; termination_opacity: number };
  camera: {
    position: [number, number, number];
    look_at: [number, number, number];
    up: [number, number, number];
    fov_y_deg: number;
  };
  bounds: { lo: [number, number, number]; hi: [number, number, number] };
  tf: { domain: [number, number]; size: number };
  histogram: { range: [number, number]; counts: number[] };
  compression: string;
}

export type ServerControl = HelloMessage | { type: "Error"; message: string };

export interface Frame {
  header: FrameHeader;
  rgba: Uint8Array;
  heatmap: Uint8Array | null;
}

export function packEnvelope(tag: number, body: Uint8Array): Uint8Array {
  const out = new Uint8Array(5 + body.length);
  const view = new DataView(out.buffer);
  view.setUint8(0, tag);
  view.setUint32(1, body.length, true);
  out.set(body, 5);
  return out;
}

export function unpackEnvelope(data: Uint8Array): { tag: number; body: Uint8Array } {
  if (data.length < 5) {
    throw new Error("short envelope");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const tag = view.getUint8(0);
  const length = view.getUint32(1, true);
  const body = data.subarray(5);
  if (body.length !== length) {
    throw new Error(`envelope length mismatch: declared ${length}, got ${body.length}`);
  }
  return { tag, body };
}

export function packJson(doc: unknown): Uint8Array {
  return packEnvelope(TAG_JSON, new TextEncoder().encode(JSON.stringify(doc)));
}

export function parseJsonBody(body: Uint8Array): ServerControl {
  return JSON.parse(new TextDecoder().decode(body)) as ServerControl;
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([data as BlobPart]).stream()
    .pipeThrough(new DecompressionStream("deflate"));
  const buf = await new Response(stream).arrayBuffer();
  return new Uint8Array(buf);
}

export async function decodeFrame(body: Uint8Array): Promise<Frame> {
  const view = new DataView(body.buffer, body.byteOffset, body.byteLength);
  const headerLength = view.getUint32(0, true);
  const header = JSON.parse(
    new TextDecoder().decode(body.subarray(4, 4 + headerLength))) as FrameHeader;
  let offset = 4 + headerLength;
  let rgba = body.subarray(offset, offset + header.rgba_bytes);
  offset += header.rgba_bytes;
  let heatmap = header.heatmap
    ? body.subarray(offset, offset + header.heatmap_bytes)
    : null;
  if (header.compression === "deflate") {
    rgba = await inflate(rgba);
    if (heatmap) {
      heatmap = await inflate(heatmap);
    }
  }
  const expected = 4 * header.width * header.height;
  if (rgba.length !== expected) {
    throw new Error(`pixel payload is ${rgba.length} bytes, expected ${expected}`);
  }
  return { header, rgba, heatmap };
}
