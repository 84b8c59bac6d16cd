"""Frame ingest, latest-frame buffering, and bit-exact snapshot storage.

Frame transport record (shared with the simulator and the live console):
a big-endian u32 payload length, then the payload: 4-byte magic ``SIMF``,
u16 width, u16 height (big-endian), then raw RGB24 row-major bytes. One
record per UDP datagram or WebSocket message.

Snapshots persist as binary PPM (P6) files plus a JSON metadata sidecar in
``<data-dir>/snapshots/``.
"""

from __future__ import annotations

import json
import re
import socket
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .imaging import RgbImage

FRAME_MAGIC = b"SIMF"
_HEADER = struct.Struct(">4sHH")


class CaptureError(Exception):
    pass


class MalformedFrame(CaptureError):
    pass


class NoFrameYet(CaptureError):
    pass


class SnapshotNotFound(CaptureError):
    pass


class MalformedPpm(CaptureError):
    pass


class IoFailure(CaptureError):
    pass


@dataclass(frozen=True)
class Frame:
    image: RgbImage
    seq: int
    timestamp_ms: int


def encode_frame_payload(img: RgbImage) -> bytes:
    return _HEADER.pack(FRAME_MAGIC, img.width, img.height) + img.pixels


def encode_frame_record(img: RgbImage) -> bytes:
    payload = encode_frame_payload(img)
    return struct.pack(">I", len(payload)) + payload


def decode_frame_payload(payload: bytes) -> RgbImage:
    if len(payload) < _HEADER.size:
        raise MalformedFrame(f"payload too short: {len(payload)} bytes")
    magic, width, height = _HEADER.unpack_from(payload)
    if magic != FRAME_MAGIC:
        raise MalformedFrame(f"bad magic {magic!r}")
    body = payload[_HEADER.size :]
    if width < 1 or height < 1 or len(body) != width * height * 3:
        raise MalformedFrame(
            f"{width}x{height} frame should carry {width * height * 3} bytes, got {len(body)}"
        )
    return RgbImage(width=width, height=height, pixels=body)


def decode_frame_record(record: bytes) -> RgbImage:
    if len(record) < 4:
        raise MalformedFrame("record shorter than its length prefix")
    (length,) = struct.unpack_from(">I", record)
    payload = record[4:]
    if length != len(payload):
        raise MalformedFrame(f"length prefix says {length}, payload is {len(payload)}")
    return decode_frame_payload(payload)


class FrameBuffer:
    """Single-slot latest-wins frame holder: one writer, many readers.

    Readers always see a complete frame; new frames overwrite unread ones.
    Malformed records are dropped and counted, leaving the latest intact.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._latest: tuple[Frame, bytes] | None = None
        self._next_seq = 1
        self._t0 = time.monotonic()
        self.ingested = 0
        self.malformed = 0

    def ingest(self, record: bytes) -> Frame:
        try:
            image = decode_frame_record(record)
        except MalformedFrame:
            with self._lock:
                self.malformed += 1
            raise
        with self._lock:
            frame = Frame(
                image=image,
                seq=self._next_seq,
                timestamp_ms=int((time.monotonic() - self._t0) * 1000),
            )
            self._next_seq += 1
            self._latest = (frame, bytes(record))
            self.ingested += 1
            return frame

    def latest(self) -> Frame | None:
        with self._lock:
            return self._latest[0] if self._latest else None

    def latest_record(self) -> tuple[Frame, bytes] | None:
        """The newest frame and its exact wire record (for lossless fan-out)."""
        with self._lock:
            return self._latest


class FrameIngestListener:
    """Background UDP receiver feeding a FrameBuffer."""

    def __init__(self, buffer: FrameBuffer, host: str = "127.0.0.1", port: int = 0):
        self.buffer = buffer
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, port))
        self._sock.settimeout(0.1)
        self._running = False
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def start(self) -> "FrameIngestListener":
        self._running = True
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._running = False
        if self._thread:
            self._thread.join(timeout=2.0)
        self._sock.close()

    def _run(self) -> None:
        while self._running:
            try:
                data, _ = self._sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                self.buffer.ingest(data)
            except MalformedFrame:
                pass  # counted by the buffer


def save_image(img: RgbImage, path: Path | str) -> None:
    """Binary PPM (P6), 8-bit; load(save(img)) round-trips byte-exactly."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + img.pixels)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


_TOKEN_RE = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def _read_ppm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    m = _TOKEN_RE.match(data, pos)
    if not m:
        raise MalformedPpm("truncated header")
    return m.group(1), m.end()


def load_image(path: Path | str) -> RgbImage:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not data.startswith(b"P6"):
        raise MalformedPpm("not a binary PPM (missing P6 magic)")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_ppm_token(data, pos)
        fields.append(token)
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise MalformedPpm(f"non-numeric header field: {fields}") from exc
    if maxval != 255:
        raise MalformedPpm(f"only 8-bit images supported, maxval is {maxval}")
    if width < 1 or height < 1:
        raise MalformedPpm(f"bad dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    pixels = data[pos : pos + width * height * 3]
    if len(pixels) != width * height * 3:
        raise MalformedPpm("pixel data truncated")
    return RgbImage(width=width, height=height, pixels=pixels)


@dataclass(frozen=True)
class Snapshot:
    id: str
    frame: Frame
    mission: str
    lineage: tuple[dict[str, Any], ...]
    path: Path


class SnapshotStore:
    """Persist captured frames with provenance; list them in snap order.

    Layout: ``<data-dir>/snapshots/<id>.ppm`` + ``<id>.json``. Ids are
    zero-padded counters, so lexicographic order is snap order; the counter
    survives restarts by scanning the directory.
    """

    _ID_RE = re.compile(r"^snap-(\d{6})$")

    def __init__(self, data_dir: Path | str):
        self.root = Path(data_dir) / "snapshots"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        existing = [
            int(m.group(1))
            for p in self.root.glob("snap-*.json")
            if (m := self._ID_RE.match(p.stem))
        ]
        self._next = max(existing, default=0) + 1

    def snap(
        self,
        frame: Frame,
        mission: str = "manual",
        lineage: tuple[dict[str, Any], ...] = (),
    ) -> Snapshot:
        with self._lock:
            snap_id = f"snap-{self._next:06d}"
            self._next += 1
        path = self.root / f"{snap_id}.ppm"
        save_image(frame.image, path)
        meta = {
            "id": snap_id,
            "seq": frame.seq,
            "timestamp_ms": frame.timestamp_ms,
            "mission": mission,
            "lineage": list(lineage),
            "width": frame.image.width,
            "height": frame.image.height,
        }
        (self.root / f"{snap_id}.json").write_text(json.dumps(meta, indent=2))
        return Snapshot(
            id=snap_id, frame=frame, mission=mission, lineage=tuple(lineage), path=path
        )

    def metadata(self, snap_id: str) -> dict[str, Any]:
        meta_path = self.root / f"{snap_id}.json"
        if not meta_path.exists():
            raise SnapshotNotFound(snap_id)
        return json.loads(meta_path.read_text())

    def image(self, snap_id: str) -> RgbImage:
        path = self.image_path(snap_id)
        if not path.exists():
            raise SnapshotNotFound(snap_id)
        return load_image(path)

    def image_path(self, snap_id: str) -> Path:
        return self.root / f"{snap_id}.ppm"

    def list(self) -> list[dict[str, Any]]:
        return [
            json.loads(p.read_text()) for p in sorted(self.root.glob("snap-*.json"))
        ]
