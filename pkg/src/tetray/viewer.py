"""Frame-streaming viewer service for live transfer-function exploration.

Wire protocol (over a WebSocket; every WS binary message is one envelope):

    envelope: 1-byte type tag + 4-byte little-endian body length + body
    tag 1: control, UTF-8 JSON, both directions
    tag 2: frame, binary: u32 LE header length + header JSON + payloads

Client control messages ("type" field): "Hello" {compression?},
"SetCamera" {position, look_at, up, fov_y_deg}, "SetTransferFunction"
{domain, rgba}, "SetParams" {s1, s2, p, mode, termination_opacity},
"RequestFrame" {width, height}. Unknown tags are rejected with an "Error"
reply; the connection stays open. Server control messages: "Hello" (scene
info, field histogram) and "Error" {message}.

Frame header JSON: frame_id (monotone), width, height, stats {ms,
total_samples, partitions_visited_mean}, heatmap (bool), compression,
rgba_bytes, heatmap_bytes. Payloads follow the header: 8-bit RGBA rows
top-down (4*w*h bytes uncompressed), then the heatmap RGBA when present.
Payloads are zlib-deflated when the client negotiated "deflate" in its
Hello. Edits apply in arrival order; bursts coalesce (only the latest
pending state renders); a TF edit recomputes metadata but never rebuilds
the partition BVH.
"""

from __future__ import annotations

import asyncio
import json
import struct
import threading
import zlib
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import wsock
from .imgio import heatmap_rgb, quantize
from .render import AdaptiveParams, Camera, MODES, render
from .scene import Scene
from .transfer import TransferFunction

TAG_JSON = 1
TAG_FRAME = 2

_ENVELOPE = struct.Struct("<BI")


def pack_envelope(tag: int, body: bytes) -> bytes:
    return _ENVELOPE.pack(tag, len(body)) + body


def unpack_envelope(data: bytes) -> tuple[int, bytes]:
    if len(data) < _ENVELOPE.size:
        raise ValueError("short envelope")
    tag, n = _ENVELOPE.unpack_from(data)
    body = data[_ENVELOPE.size:]
    if len(body) != n:
        raise ValueError(f"envelope length mismatch: declared {n}, got {len(body)}")
    return tag, body


def pack_json(doc: dict) -> bytes:
    return pack_envelope(TAG_JSON, json.dumps(doc).encode("utf-8"))


def encode_frame_message(frame_id: int, rgba_u8: np.ndarray,
                         stats: dict, heatmap_u8: Optional[np.ndarray],
                         compression: str = "none") -> bytes:
    h, w = rgba_u8.shape[:2]
    rgba = rgba_u8.tobytes()
    heat = heatmap_u8.tobytes() if heatmap_u8 is not None else b""
    if compression == "deflate":
        rgba = zlib.compress(rgba)
        heat = zlib.compress(heat) if heat else b""
    header = json.dumps({
        "frame_id": frame_id, "width": w, "height": h, "stats": stats,
        "heatmap": heatmap_u8 is not None, "compression": compression,
        "rgba_bytes": len(rgba), "heatmap_bytes": len(heat),
    }).encode("utf-8")
    body = struct.pack("<I", len(header)) + header + rgba + heat
    return pack_envelope(TAG_FRAME, body)


def decode_frame_message(body: bytes) -> tuple[dict, bytes, Optional[bytes]]:
    (hlen,) = struct.unpack_from("<I", body)
    header = json.loads(body[4:4 + hlen].decode("utf-8"))
    off = 4 + hlen
    rgba = body[off:off + header["rgba_bytes"]]
    off += header["rgba_bytes"]
    heat = body[off:off + header["heatmap_bytes"]] if header["heatmap"] else None
    if header.get("compression") == "deflate":
        rgba = zlib.decompress(rgba)
        heat = zlib.decompress(heat) if heat else heat
    return header, rgba, heat


@dataclass(eq=False)
class _Client:
    writer: asyncio.StreamWriter
    compression: str = "none"


class ViewerServer:
    """Single render worker with latest-state coalescing; edits arrive on the
    event loop, renders run in an executor thread, frames broadcast to every
    connected client with strictly increasing frame ids."""

    def __init__(self, scene: Scene, camera: Camera, params: AdaptiveParams,
                 mode: str = "skip-adaptive", host: str = "127.0.0.1",
                 port: int = 0, threads: Optional[int] = None,
                 include_heatmap: bool = True):
        self.scene = scene
        self.camera = camera
        self.params = params
        self.mode = mode
        self.host = host
        self.port = port
        self.threads = threads
        self.include_heatmap = include_heatmap
        self.frame_id = 0
        self._clients: set[_Client] = set()
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._started = threading.Event()
        self._histogram = self._field_histogram()

    def _field_histogram(self, bins: int = 256) -> dict:
        f = self.scene.mesh.field
        lo, hi = float(f.min()), float(f.max())
        counts, _ = np.histogram(f, bins=bins, range=(lo, hi if hi > lo else lo + 1.0))
        return {"range": [lo, hi], "counts": counts.tolist()}

    # -- state edits (run on the event loop) --------------------------------

    def _hello_doc(self) -> dict:
        return {
            "type": "Hello", "protocol": 1,
            "width": self.camera.width, "height": self.camera.height,
            "mode": self.mode,
            "params": {"s1": self.params.s1, "s2": self.params.s2,
                       "p": self.params.p,
                       "termination_opacity": self.params.termination_opacity},
            "camera": {"position": self.camera.position.tolist(),
                       "look_at": self.camera.look_at.tolist(),
                       "up": self.camera.up.tolist(),
                       "fov_y_deg": self.camera.fov_y_deg},
            "bounds": {"lo": self.scene.mesh.bounds.lo.tolist(),
                       "hi": self.scene.mesh.bounds.hi.tolist()},
            "tf": {"domain": list(self.scene.tf.domain), "size": self.scene.tf.size},
            "histogram": self._histogram,
            "compression": "none",
        }

    def _apply(self, doc: dict, client: _Client) -> bool:
        """Apply one edit; returns True when a re-render is needed. Raises
        ValueError/KeyError on invalid input, leaving state unchanged."""
        kind = doc.get("type")
        if kind == "Hello":
            comp = doc.get("compression", "none")
            if comp not in ("none", "deflate"):
                raise ValueError(f"unknown compression {comp!r}")
            client.compression = comp
            return False
        if kind == "SetCamera":
            self.camera = Camera(
                position=doc["position"], look_at=doc["look_at"],
                up=doc.get("up", [0.0, 1.0, 0.0]),
                fov_y_deg=doc.get("fov_y_deg", self.camera.fov_y_deg),
                width=self.camera.width, height=self.camera.height)
            return True
        if kind == "SetTransferFunction":
            tf = TransferFunction(tuple(doc["domain"]),
                                  np.asarray(doc["rgba"], dtype=np.float64))
            self.scene.set_transfer_function(tf)
            return True
        if kind == "SetParams":
            mode = doc.get("mode", self.mode)
            if mode not in MODES:
                raise ValueError(f"unknown mode {mode!r}")
            self.params = AdaptiveParams(
                s1=doc.get("s1", self.params.s1),
                s2=doc.get("s2", self.params.s2),
                p=doc.get("p", self.params.p),
                termination_opacity=doc.get("termination_opacity",
                                            self.params.termination_opacity))
            self.mode = mode
            return True
        if kind == "RequestFrame":
            w = int(doc.get("width", self.camera.width))
            h = int(doc.get("height", self.camera.height))
            if (w, h) != (self.camera.width, self.camera.height):
                self.camera = replace(self.camera, width=w, height=h)
            return True
        raise ValueError(f"unknown message type {kind!r}")

    # -- render worker -------------------------------------------------------

    def _render_current(self):
        fb, stats = render(self.scene, self.camera, self.mode, self.params,
                           threads=self.threads)
        rgba = quantize(fb.rgba)
        heat = None
        if self.include_heatmap:
            hm = heatmap_rgb(fb.samples)
            heat = np.concatenate(
                [hm, np.full(hm.shape[:2] + (1,), 255, dtype=np.uint8)], axis=2)
        return rgba, heat, {
            "ms": stats.wall_ms,
            "total_samples": stats.total_samples,
            "partitions_visited_mean": stats.partitions_visited_mean,
        }

    async def _render_loop(self, dirty: asyncio.Event):
        loop = asyncio.get_running_loop()
        while True:
            await dirty.wait()
            dirty.clear()
            try:
                rgba, heat, stats = await loop.run_in_executor(None, self._render_current)
            except Exception as exc:  # render failure -> error frame
                await self._broadcast_json({"type": "Error",
                                            "message": f"render failed: {exc}"})
                continue
            self.frame_id += 1
            for client in list(self._clients):
                msg = encode_frame_message(self.frame_id, rgba, stats, heat,
                                           client.compression)
                try:
                    await wsock.write_message(client.writer, wsock.OP_BINARY, msg)
                except (ConnectionError, OSError):
                    self._clients.discard(client)

    async def _broadcast_json(self, doc: dict) -> None:
        for client in list(self._clients):
            try:
                await wsock.write_message(client.writer, wsock.OP_BINARY,
                                          pack_json(doc))
            except (ConnectionError, OSError):
                self._clients.discard(client)

    async def _handle_client(self, reader, writer, dirty: asyncio.Event):
        try:
            await wsock.server_handshake(reader, writer)
        except (wsock.HandshakeError, asyncio.IncompleteReadError, ConnectionError):
            writer.close()
            return
        client = _Client(writer=writer)
        self._clients.add(client)
        try:
            await wsock.write_message(writer, wsock.OP_BINARY,
                                      pack_json(self._hello_doc()))
            while True:
                msg = await wsock.read_message(reader)
                if msg is None:
                    break
                opcode, payload = msg
                if opcode == wsock.OP_PING:
                    await wsock.write_message(writer, wsock.OP_PONG, payload)
                    continue
                if opcode == wsock.OP_PONG:
                    continue
                try:
                    tag, body = unpack_envelope(payload)
                    if tag != TAG_JSON:
                        raise ValueError(f"unexpected envelope tag {tag}")
                    doc = json.loads(body.decode("utf-8"))
                    if self._apply(doc, client):
                        dirty.set()
                except Exception as exc:  # malformed message: reply, keep open
                    await wsock.write_message(
                        writer, wsock.OP_BINARY,
                        pack_json({"type": "Error", "message": str(exc)}))
        except (ConnectionError, OSError):
            pass
        finally:
            self._clients.discard(client)
            writer.close()

    async def _serve(self, ready: threading.Event):
        dirty = asyncio.Event()
        server = await asyncio.start_server(
            lambda r, w: self._handle_client(r, w, dirty), self.host, self.port)
        self.port = server.sockets[0].getsockname()[1]
        self._render_task = asyncio.get_running_loop().create_task(
            self._render_loop(dirty))
        ready.set()
        async with server:
            await server.serve_forever()

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> tuple[str, int]:
        """Run the server on a background thread; returns (host, port)."""
        def runner():
            self._loop = asyncio.new_event_loop()
            asyncio.set_event_loop(self._loop)
            try:
                self._loop.run_until_complete(self._serve(self._started))
            except asyncio.CancelledError:
                pass
            finally:
                self._loop.close()

        self._thread = threading.Thread(target=runner, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=30):
            raise RuntimeError("viewer server failed to start")
        return self.host, self.port

    def stop(self) -> None:
        if self._loop is None:
            return

        def shutdown():
            for task in asyncio.all_tasks(self._loop):
                task.cancel()

        self._loop.call_soon_threadsafe(shutdown)
        self._thread.join(timeout=10)

    def run_blocking(self) -> None:
        asyncio.run(self._serve(threading.Event()))


def serve(scene: Scene, camera: Camera, params: AdaptiveParams,
          mode: str = "skip-adaptive", host: str = "127.0.0.1",
          port: int = 7878, threads: Optional[int] = None) -> None:
    """Blocking entry point used by the CLI `serve` subcommand."""
    ViewerServer(scene, camera, params, mode=mode, host=host, port=port,
                 threads=threads).run_blocking()
