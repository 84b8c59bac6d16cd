"""A protocol-conformant software drone.

Binds a UDP command port speaking the same wire table as the link module,
steps a kinematic state machine, and, while streaming, publishes synthetic
camera frames (with optional seeded noise) to the commander's address on
the video port. Ground frame convention: heading 0 points along +y, angles
grow clockwise, positions are integer centimeters inside a square arena.
"""

from __future__ import annotations

import math
import socket
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import link
from .capture import encode_frame_record
from .imaging import RgbImage, convolve_replicated, gaussian_kernel
from .link import CommandFrame, CommandKind, ResponseFrame


class SimError(Exception):
    pass


class StreamOff(SimError):
    """Asked to render while the camera stream is off."""


class BindFailure(SimError):
    pass


class Phase(Enum):
    GROUNDED = "grounded"
    FLYING = "flying"


@dataclass(frozen=True)
class SimDroneState:
    phase: Phase = Phase.GROUNDED
    x: int = 500
    y: int = 500
    heading: int = 0  # degrees, [0, 360)
    altitude: int = 0  # cm
    battery: int = 100  # percent
    sdk_mode: bool = False
    streaming: bool = False


@dataclass(frozen=True)
class Uniform:
    gray: int = 128


@dataclass(frozen=True)
class Checkerboard:
    cell_px: int = 16
    color_a: tuple[int, int, int] = (255, 255, 255)
    color_b: tuple[int, int, int] = (0, 0, 0)


@dataclass(frozen=True)
class StepEdge:
    column: int = 64
    left_val: int = 0
    right_val: int = 255


ScenePattern = Uniform | Checkerboard | StepEdge


@dataclass(frozen=True)
class SimScene:
    pattern: ScenePattern = field(default_factory=Checkerboard)
    frame_size: tuple[int, int] = (128, 128)  # (width, height)

    def __post_init__(self):
        if self.frame_size[0] < 8 or self.frame_size[1] < 8:
            raise ValueError("frames must be at least 8x8")
        if isinstance(self.pattern, Checkerboard) and self.pattern.cell_px < 1:
            raise ValueError("checkerboard cells must be at least 1 px")


@dataclass(frozen=True)
class NoiseSpec:
    """Seeded image degradation menu: dust, blur, sensor noise.

    kind: "none" | "salt_pepper" (p = impulse probability) |
    "gaussian_blur" (sigma px) | "additive_gaussian" (sigma gray levels).
    """

    kind: str = "none"
    p: float = 0.0
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "salt_pepper", "gaussian_blur", "additive_gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"probability must be in [0, 1], got {self.p}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass
class SimConfig:
    host: str = "127.0.0.1"
    cmd_port: int = 8889  # 0 = ephemeral
    video_port: int = 11111  # destination port on the commander's host
    fps: float = 5.0
    scene: SimScene = field(default_factory=SimScene)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    default_takeoff_alt: int = 100
    arena_cm: int = 1000
    start_x: int = 500
    start_y: int = 500
    battery: int = 100


# Exact direction vectors for the four cardinal headings keep the square
# mission closed under integer arithmetic.
_CARDINAL = {0: (0, 1), 90: (1, 0), 180: (0, -1), 270: (-1, 0)}


def _round_cm(v: float) -> int:
    if v >= 0:
        return int(math.floor(v + 0.5))
    return -int(math.floor(-v + 0.5))


def _heading_vector(heading: int, dist: int) -> tuple[int, int]:
    if heading in _CARDINAL:
        ux, uy = _CARDINAL[heading]
        return dist * ux, dist * uy
    rad = math.radians(heading)
    return _round_cm(dist * math.sin(rad)), _round_cm(dist * math.cos(rad))


def _drain(st: SimDroneState) -> SimDroneState:
    return replace(st, battery=max(0, st.battery - 1))


def step_command(
    st: SimDroneState, cmd: CommandFrame, cfg: SimConfig | None = None
) -> tuple[SimDroneState, ResponseFrame]:
    """Apply one command to the state; illegal transitions answer in-band.

    Motion commands cost 1% battery. Moves that would leave the
    [0, arena_cm] square are refused, honoring the bounded test arena.
    """
    cfg = cfg or SimConfig()
    kind = cmd.kind

    if kind is CommandKind.ENTER_SDK_MODE:
        return replace(st, sdk_mode=True), ResponseFrame.ok()
    if not st.sdk_mode:
        return st, ResponseFrame.error("error not in sdk mode")

    if kind is CommandKind.QUERY_BATTERY:
        return st, ResponseFrame.of_value(st.battery)
    if kind is CommandKind.STREAM_ON:
        return replace(st, streaming=True), ResponseFrame.ok()
    if kind is CommandKind.STREAM_OFF:
        return replace(st, streaming=False), ResponseFrame.ok()

    if kind is CommandKind.TAKEOFF:
        if st.phase is Phase.FLYING:
            return st, ResponseFrame.error("error already flying")
        return (
            _drain(replace(st, phase=Phase.FLYING, altitude=cfg.default_takeoff_alt)),
            ResponseFrame.ok(),
        )
    if kind is CommandKind.LAND:
        if st.phase is Phase.GROUNDED:
            return st, ResponseFrame.error("error not flying")
        return _drain(replace(st, phase=Phase.GROUNDED, altitude=0)), ResponseFrame.ok()

    # Everything below moves the airframe.
    if st.phase is Phase.GROUNDED:
        return st, ResponseFrame.error("error not flying")

    if kind in link.ROTATION_KINDS:
        delta = cmd.magnitude if kind is CommandKind.ROTATE_CW else -cmd.magnitude
        return _drain(replace(st, heading=(st.heading + delta) % 360)), ResponseFrame.ok()

    if kind is CommandKind.UP:
        return _drain(replace(st, altitude=st.altitude + cmd.magnitude)), ResponseFrame.ok()
    if kind is CommandKind.DOWN:
        if st.altitude - cmd.magnitude < 0:
            return st, ResponseFrame.error("error not enough altitude")
        return _drain(replace(st, altitude=st.altitude - cmd.magnitude)), ResponseFrame.ok()

    # Horizontal translation along a heading relative to the nose.
    offsets = {
        CommandKind.FORWARD: 0,
        CommandKind.RIGHT: 90,
        CommandKind.BACK: 180,
        CommandKind.LEFT: 270,
    }
    dx, dy = _heading_vector((st.heading + offsets[kind]) % 360, cmd.magnitude)
    nx, ny = st.x + dx, st.y + dy
    if not (0 <= nx <= cfg.arena_cm and 0 <= ny <= cfg.arena_cm):
        return st, ResponseFrame.error("error out of arena")
    return _drain(replace(st, x=nx, y=ny)), ResponseFrame.ok()


def render_frame(st: SimDroneState, scene: SimScene) -> RgbImage:
    """Nadir camera: pixel (px, py) samples the ground at (x + px, y + py).

    Pure in (pose, scene); heading and altitude do not affect the view.
    """
    if not st.streaming:
        raise StreamOff("camera stream is off")
    w, h = scene.frame_size
    pat = scene.pattern
    if isinstance(pat, Uniform):
        arr = np.full((h, w, 3), pat.gray, dtype=np.uint8)
    elif isinstance(pat, Checkerboard):
        sx = (st.x + np.arange(w)) // pat.cell_px
        sy = (st.y + np.arange(h)) // pat.cell_px
        parity = (sx[None, :] + sy[:, None]) % 2
        a = np.array(pat.color_a, dtype=np.uint8)
        b = np.array(pat.color_b, dtype=np.uint8)
        arr = np.where(parity[..., None] == 0, a, b)
    else:
        sx = st.x + np.arange(w)
        vals = np.where(sx < pat.column, pat.left_val, pat.right_val).astype(np.uint8)
        arr = np.repeat(np.tile(vals, (h, 1))[..., None], 3, axis=2)
    return RgbImage.from_array(arr)


def _round_half_away(arr: np.ndarray) -> np.ndarray:
    return np.sign(arr) * np.floor(np.abs(arr) + 0.5)


def inject_noise(img: RgbImage, spec: NoiseSpec) -> RgbImage:
    """Seeded, reproducible corruption of a rendered frame."""
    if spec.kind == "none":
        return img
    rng = np.random.default_rng(spec.seed)
    arr = img.to_array()
    if spec.kind == "salt_pepper":
        hit = rng.random((img.height, img.width)) < spec.p
        extremes = (rng.integers(0, 2, (img.height, img.width)) * 255).astype(np.uint8)
        out = arr.copy()
        out[hit] = extremes[hit, None]
        return RgbImage.from_array(out)
    if spec.kind == "additive_gaussian":
        noisy = arr.astype(np.float64) + rng.normal(0.0, spec.sigma, arr.shape)
        return RgbImage.from_array(
            np.clip(_round_half_away(noisy), 0, 255).astype(np.uint8)
        )
    # gaussian_blur
    if spec.sigma == 0:
        return img
    kernel = gaussian_kernel(spec.sigma)
    out = np.empty_like(arr)
    for c in range(3):
        blurred = convolve_replicated(arr[..., c].astype(np.float64), kernel)
        out[..., c] = np.clip(np.floor(blurred + 0.5), 0, 255).astype(np.uint8)
    return RgbImage.from_array(out)


class DroneSim:
    """Serving handle: UDP command endpoint plus a frame publisher.

    The command loop owns the state; observers get immutable snapshots.
    ``inject_fault`` forces an error reply on the Nth occurrence of a wire
    word, for abort-path testing.
    """

    def __init__(self, cfg: SimConfig | None = None):
        self.cfg = cfg or SimConfig()
        self._state = SimDroneState(
            x=self.cfg.start_x, y=self.cfg.start_y, battery=self.cfg.battery
        )
        self._lock = threading.Lock()
        self._running = False
        self._cmd_sock: socket.socket | None = None
        self._video_sock: socket.socket | None = None
        self._video_dest: tuple[str, int] | None = None
        self._threads: list[threading.Thread] = []
        self._faults: dict[str, int] = {}
        self._word_counts: dict[str, int] = {}
        self.frames_published = 0

    # -- lifecycle -----------------------------------------------------

    def start(self) -> "DroneSim":
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind((self.cfg.host, self.cfg.cmd_port))
        except OSError as exc:
            sock.close()
            raise BindFailure(f"cannot bind command port: {exc}") from exc
        sock.settimeout(0.1)
        self._cmd_sock = sock
        self._video_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._running = True
        for target in (self._serve_commands, self._publish_frames):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self) -> SimDroneState:
        """Stop serving; the final state stays retrievable (no auto-land)."""
        self._running = False
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()
        if self._cmd_sock:
            self._cmd_sock.close()
        if self._video_sock:
            self._video_sock.close()
        return self.state()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    @property
    def cmd_addr(self) -> tuple[str, int]:
        assert self._cmd_sock is not None, "simulator not started"
        return self._cmd_sock.getsockname()

    def state(self) -> SimDroneState:
        with self._lock:
            return self._state

    def inject_fault(self, wire_word: str, occurrence: int) -> None:
        """Answer the Nth (1-based) arrival of ``wire_word`` with an error."""
        self._faults[wire_word] = occurrence

    # -- serving loops ---------------------------------------------------

    def _respond(self, data: bytes) -> tuple[ResponseFrame, CommandFrame | None]:
        try:
            cmd = link.parse_command(data)
        except link.LinkError as exc:
            return ResponseFrame.error(f"error {exc}"), None
        word = cmd.kind.value
        self._word_counts[word] = self._word_counts.get(word, 0) + 1
        if self._faults.get(word) == self._word_counts[word]:
            return ResponseFrame.error("error injected fault"), cmd
        with self._lock:
            self._state, resp = step_command(self._state, cmd, self.cfg)
        return resp, cmd

    def _serve_commands(self) -> None:
        while self._running:
            try:
                data, addr = self._cmd_sock.recvfrom(2048)
            except socket.timeout:
                continue
            except OSError:
                break
            resp, cmd = self._respond(data)
            if cmd is not None and cmd.kind is CommandKind.STREAM_ON:
                self._video_dest = (addr[0], self.cfg.video_port)
            try:
                self._cmd_sock.sendto(link.encode_response(resp), addr)
            except OSError:
                break

    def _publish_frames(self) -> None:
        period = 1.0 / self.cfg.fps
        while self._running:
            st = self.state()
            dest = self._video_dest
            if st.streaming and dest is not None:
                frame = render_frame(st, self.cfg.scene)
                if self.cfg.noise.kind != "none":
                    per_frame = replace(
                        self.cfg.noise, seed=self.cfg.noise.seed + self.frames_published
                    )
                    frame = inject_noise(frame, per_frame)
                try:
                    self._video_sock.sendto(encode_frame_record(frame), dest)
                except OSError:
                    break
                self.frames_published += 1
            time.sleep(period)


def serve_endpoint(cfg: SimConfig | None = None) -> DroneSim:
    """Start a simulator and return its serving handle."""
    return DroneSim(cfg).start()
