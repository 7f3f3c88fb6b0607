"""Minimal RFC 6455 WebSocket framing: asyncio server side plus a blocking
client for scripted sessions and tests.

Supports what the viewer protocol needs: the upgrade handshake, binary/text
frames with 16/64-bit lengths, fragmentation reassembly, ping/pong, and
close. Client-to-server frames are masked as the RFC requires; server frames
are not. No extensions or subprotocols.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import os
import socket
import struct

import numpy as np

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class HandshakeError(Exception):
    pass


def _accept_key(key: str) -> str:
    digest = hashlib.sha1((key + GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _apply_mask(data: bytes, key: bytes) -> bytes:
    arr = np.frombuffer(data, dtype=np.uint8)
    k = np.frombuffer((key * (len(data) // 4 + 1))[:len(data)], dtype=np.uint8)
    return (arr ^ k).tobytes()


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 0x10000:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        return head + key + _apply_mask(payload, key)
    return head + payload


async def server_handshake(reader: asyncio.StreamReader,
                           writer: asyncio.StreamWriter) -> dict:
    request = await reader.readuntil(b"\r\n\r\n")
    lines = request.decode("latin-1").split("\r\n")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get("sec-websocket-key")
    if not key or "websocket" not in headers.get("upgrade", "").lower():
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        raise HandshakeError("not a websocket upgrade request")
    writer.write((
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n\r\n").encode("ascii"))
    await writer.drain()
    return headers


async def read_message(reader: asyncio.StreamReader):
    """One complete message as (opcode, payload); None once the peer closes.
    Control frames (ping/pong) are surfaced like data frames."""
    opcode = None
    buf = b""
    while True:
        try:
            head = await reader.readexactly(2)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            return None
        fin = head[0] & 0x80
        op = head[0] & 0x0F
        masked = head[1] & 0x80
        n = head[1] & 0x7F
        if n == 126:
            n = struct.unpack(">H", await reader.readexactly(2))[0]
        elif n == 127:
            n = struct.unpack(">Q", await reader.readexactly(8))[0]
        key = await reader.readexactly(4) if masked else None
        payload = await reader.readexactly(n) if n else b""
        if key:
            payload = _apply_mask(payload, key)
        if op == OP_CLOSE:
            return None
        if op in (OP_PING, OP_PONG):
            return op, payload
        if op != OP_CONT:
            opcode = op
            buf = payload
        else:
            buf += payload
        if fin:
            return opcode, buf


async def write_message(writer: asyncio.StreamWriter, opcode: int,
                        payload: bytes) -> None:
    writer.write(encode_frame(opcode, payload, mask=False))
    await writer.drain()


class WsClient:
    """Blocking WebSocket client (client frames masked per the RFC)."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "WsClient":
        sock = socket.create_connection((host, port), timeout=timeout)
        key = base64.b64encode(os.urandom(16)).decode("ascii")
        sock.sendall((
            f"GET / HTTP/1.1\r\nHost: {host}:{port}\r\n"
            "Upgrade: websocket\r\nConnection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
        ).encode("ascii"))
        client = cls(sock)
        response = client._read_until(b"\r\n\r\n")
        status = response.split(b"\r\n", 1)[0]
        if b"101" not in status:
            raise HandshakeError(f"server refused upgrade: {status!r}")
        expect = _accept_key(key).encode("ascii")
        if expect not in response:
            raise HandshakeError("bad Sec-WebSocket-Accept")
        return client

    def _read_until(self, marker: bytes) -> bytes:
        while marker not in self._buf:
            chunk = self._sock.recv(65536)
            if not chunk:
                raise ConnectionError("connection closed during handshake")
            self._buf += chunk
        idx = self._buf.index(marker) + len(marker)
        out, self._buf = self._buf[:idx], self._buf[idx:]
        return out

    def _read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self._sock.recv(max(65536, n - len(self._buf)))
            if not chunk:
                raise ConnectionError("connection closed mid-frame")
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def send(self, payload: bytes, opcode: int = OP_BINARY) -> None:
        self._sock.sendall(encode_frame(opcode, payload, mask=True))

    def recv(self):
        """(opcode, payload) of the next complete message; None on close."""
        opcode = None
        buf = b""
        while True:
            head = self._read_exact(2)
            fin = head[0] & 0x80
            op = head[0] & 0x0F
            masked = head[1] & 0x80
            n = head[1] & 0x7F
            if n == 126:
                n = struct.unpack(">H", self._read_exact(2))[0]
            elif n == 127:
                n = struct.unpack(">Q", self._read_exact(8))[0]
            key = self._read_exact(4) if masked else None
            payload = self._read_exact(n) if n else b""
            if key:
                payload = _apply_mask(payload, key)
            if op == OP_CLOSE:
                return None
            if op in (OP_PING, OP_PONG):
                continue
            if op != OP_CONT:
                opcode = op
                buf = payload
            else:
                buf += payload
            if fin:
                return opcode, buf

    def settimeout(self, t) -> None:
        self._sock.settimeout(t)

    def close(self) -> None:
        try:
            self._sock.sendall(encode_frame(OP_CLOSE, b"", mask=True))
        except OSError:
            pass
        self._sock.close()
