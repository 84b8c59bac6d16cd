"""UDP text command protocol and the command session against one drone.

The wire vocabulary is the public Tello SDK v2 word list. Commands are
plain ASCII datagrams with no terminator; replies are "ok", "error" with
optional detail, or a bare integer for queries. The protocol carries no
sequence numbers, so a session keeps exactly one command in flight and
matches replies by order.
"""

from __future__ import annotations

import re
import socket
import time
from dataclasses import dataclass, field
from enum import Enum


class LinkError(Exception):
    """Base class for command link failures."""


class InvalidMagnitude(LinkError):
    pass


class EmptyDatagram(LinkError):
    pass


class ProtocolError(LinkError):
    """A datagram that is not a valid command word (decode side)."""


class BindFailure(LinkError):
    pass


class ConnectTimeout(LinkError):
    pass


class ReplyTimeout(LinkError):
    pass


class DroneError(LinkError):
    """The drone answered with an error reply; the session stays usable."""

    def __init__(self, text: str):
        super().__init__(text)
        self.text = text


class CommandKind(Enum):
    """Command vocabulary; values are the wire words."""

    ENTER_SDK_MODE = "command"
    TAKEOFF = "takeoff"
    LAND = "land"
    FORWARD = "forward"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"
    UP = "up"
    DOWN = "down"
    ROTATE_CW = "cw"
    ROTATE_CCW = "ccw"
    STREAM_ON = "streamon"
    STREAM_OFF = "streamoff"
    QUERY_BATTERY = "battery?"


TRANSLATION_KINDS = frozenset(
    {
        CommandKind.FORWARD,
        CommandKind.BACK,
        CommandKind.LEFT,
        CommandKind.RIGHT,
        CommandKind.UP,
        CommandKind.DOWN,
    }
)
ROTATION_KINDS = frozenset({CommandKind.ROTATE_CW, CommandKind.ROTATE_CCW})
QUERY_KINDS = frozenset({CommandKind.QUERY_BATTERY})

TRANSLATION_RANGE = (20, 500)  # cm
ROTATION_RANGE = (1, 360)  # degrees

_WORD_TO_KIND = {k.value: k for k in CommandKind}


@dataclass(frozen=True)
class CommandFrame:
    kind: CommandKind
    magnitude: int | None = None

    @classmethod
    def enter_sdk_mode(cls):
        return cls(CommandKind.ENTER_SDK_MODE)

    @classmethod
    def takeoff(cls):
        return cls(CommandKind.TAKEOFF)

    @classmethod
    def land(cls):
        return cls(CommandKind.LAND)

    @classmethod
    def forward(cls, cm: int):
        return cls(CommandKind.FORWARD, cm)

    @classmethod
    def rotate_cw(cls, deg: int):
        return cls(CommandKind.ROTATE_CW, deg)

    @classmethod
    def rotate_ccw(cls, deg: int):
        return cls(CommandKind.ROTATE_CCW, deg)

    @classmethod
    def stream_on(cls):
        return cls(CommandKind.STREAM_ON)

    @classmethod
    def stream_off(cls):
        return cls(CommandKind.STREAM_OFF)

    @classmethod
    def query_battery(cls):
        return cls(CommandKind.QUERY_BATTERY)


def validate_command(cmd: CommandFrame) -> None:
    if cmd.kind in TRANSLATION_KINDS:
        lo, hi = TRANSLATION_RANGE
        if cmd.magnitude is None or not (lo <= cmd.magnitude <= hi):
            raise InvalidMagnitude(
                f"{cmd.kind.value} needs a magnitude in [{lo}, {hi}] cm, got {cmd.magnitude}"
            )
    elif cmd.kind in ROTATION_KINDS:
        lo, hi = ROTATION_RANGE
        if cmd.magnitude is None or not (lo <= cmd.magnitude <= hi):
            raise InvalidMagnitude(
                f"{cmd.kind.value} needs a magnitude in [{lo}, {hi}] deg, got {cmd.magnitude}"
            )
    elif cmd.magnitude is not None:
        raise InvalidMagnitude(f"{cmd.kind.value} carries no magnitude")


def encode_command(cmd: CommandFrame) -> bytes:
    """ASCII wire word, e.g. ``forward 100``; no trailing newline."""
    validate_command(cmd)
    if cmd.magnitude is not None:
        return f"{cmd.kind.value} {cmd.magnitude}".encode("ascii")
    return cmd.kind.value.encode("ascii")


def parse_command(raw: bytes | str) -> CommandFrame:
    """Decode a wire word back into a CommandFrame (the simulator's inbox)."""
    text = raw.decode("ascii", errors="replace") if isinstance(raw, bytes) else raw
    parts = text.strip().split()
    if not parts:
        raise EmptyDatagram("empty command datagram")
    kind = _WORD_TO_KIND.get(parts[0])
    if kind is None:
        raise ProtocolError(f"unknown command {parts[0]!r}")
    if len(parts) == 1:
        cmd = CommandFrame(kind)
    elif len(parts) == 2:
        try:
            cmd = CommandFrame(kind, int(parts[1]))
        except ValueError as exc:
            raise ProtocolError(f"bad magnitude {parts[1]!r}") from exc
    else:
        raise ProtocolError(f"too many fields in {text!r}")
    validate_command(cmd)
    return cmd


class ResponseKind(Enum):
    OK = "ok"
    ERROR = "error"
    VALUE = "value"


@dataclass(frozen=True)
class ResponseFrame:
    kind: ResponseKind
    text: str = ""
    value: int | None = None

    @classmethod
    def ok(cls):
        return cls(ResponseKind.OK)

    @classmethod
    def error(cls, text: str):
        if not text:
            raise ValueError("error text must be non-empty")
        return cls(ResponseKind.ERROR, text=text)

    @classmethod
    def of_value(cls, n: int):
        return cls(ResponseKind.VALUE, value=n)

    @property
    def is_ok(self) -> bool:
        return self.kind is ResponseKind.OK


_INT_RE = re.compile(r"^[+-]?\d+$")


def parse_response(raw: bytes) -> ResponseFrame:
    """Reply grammar: "ok" (any case) -> Ok; an integer -> Value; else Error."""
    text = raw.decode("utf-8", errors="replace").strip()
    if not text:
        raise EmptyDatagram("empty reply datagram")
    if text.lower() == "ok":
        return ResponseFrame.ok()
    if _INT_RE.match(text):
        return ResponseFrame.of_value(int(text))
    return ResponseFrame.error(text)


def encode_response(resp: ResponseFrame) -> bytes:
    if resp.kind is ResponseKind.OK:
        return b"ok"
    if resp.kind is ResponseKind.VALUE:
        return str(resp.value).encode("ascii")
    return resp.text.encode("utf-8")


@dataclass
class LinkEndpoint:
    """Where the drone lives and where we listen for its replies.

    ``local_bind`` port 0 asks the OS for an ephemeral port (used by tests
    and by several sessions sharing one host).
    """

    drone_addr: tuple[str, int] = ("192.168.10.1", 8889)
    local_bind: tuple[str, int] = ("0.0.0.0", 9000)
    reply_timeout_ms: int = 7000
    max_retries: int = 3

    def __post_init__(self):
        if not (1 <= self.drone_addr[1] <= 65535):
            raise ValueError(f"drone port out of range: {self.drone_addr[1]}")
        if not (0 <= self.local_bind[1] <= 65535):
            raise ValueError(f"local port out of range: {self.local_bind[1]}")
        if self.reply_timeout_ms <= 0:
            raise ValueError("reply_timeout must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")


@dataclass(frozen=True)
class LinkEvent:
    timestamp: float
    direction: str  # "out" | "in" | "timeout"
    payload: bytes


class LinkSession:
    """One synchronous command conversation with one drone endpoint.

    The session is confined to a single logical owner; `send_command`
    refuses reentrant use so the one-in-flight invariant is enforced, not
    just documented.
    """

    def __init__(self, endpoint: LinkEndpoint, sock: socket.socket):
        self.endpoint = endpoint
        self.sdk_mode = False
        self.last_seq = 0
        self.attempts = 0
        self.event_log: list[LinkEvent] = []
        self._sock = sock
        self._in_flight = False

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _drain(self) -> None:
        self._sock.settimeout(0)
        try:
            while True:
                self._sock.recvfrom(65536)
        except (BlockingIOError, socket.timeout):
            pass

    def send_command(self, cmd: CommandFrame) -> ResponseFrame:
        """Send one command and block for its reply.

        Raises ReplyTimeout after ``reply_timeout_ms`` without an answer and
        DroneError when the drone answers with an error text; both leave the
        session usable for further commands.
        """
        if self._in_flight:
            raise LinkError("a command is already awaiting its reply")
        if not self.sdk_mode and cmd.kind is not CommandKind.ENTER_SDK_MODE:
            raise LinkError("session is not in SDK mode; send EnterSdkMode first")
        payload = encode_command(cmd)
        self._in_flight = True
        try:
            self._drain()  # stale replies from earlier timeouts must not match
            self._sock.sendto(payload, self.endpoint.drone_addr)
            self.last_seq += 1
            self.event_log.append(LinkEvent(time.time(), "out", payload))
            deadline = time.monotonic() + self.endpoint.reply_timeout_ms / 1000.0
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self.event_log.append(LinkEvent(time.time(), "timeout", b""))
                    raise ReplyTimeout(
                        f"no reply to {payload.decode()!r} within "
                        f"{self.endpoint.reply_timeout_ms} ms"
                    )
                self._sock.settimeout(remaining)
                try:
                    data, sender = self._sock.recvfrom(65536)
                except socket.timeout:
                    continue
                if sender != self.endpoint.drone_addr:
                    continue  # not our drone
                self.event_log.append(LinkEvent(time.time(), "in", data))
                resp = parse_response(data)
                if resp.kind is ResponseKind.ERROR:
                    raise DroneError(resp.text)
                if cmd.kind is CommandKind.ENTER_SDK_MODE and resp.is_ok:
                    self.sdk_mode = True
                return resp
        finally:
            self._in_flight = False


def open_session(endpoint: LinkEndpoint) -> LinkSession:
    """Bind the local port and enter SDK mode, retrying the handshake.

    Sends the SDK-mode word up to ``max_retries`` times, one reply timeout
    apart, before giving up with ConnectTimeout.
    """
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind(endpoint.local_bind)
    except OSError as exc:
        sock.close()
        raise BindFailure(f"cannot bind {endpoint.local_bind}: {exc}") from exc
    session = LinkSession(endpoint, sock)
    for attempt in range(1, endpoint.max_retries + 1):
        session.attempts = attempt
        try:
            session.send_command(CommandFrame.enter_sdk_mode())
            return session
        except ReplyTimeout:
            continue
        except DroneError:
            session.close()
            raise
    session.close()
    raise ConnectTimeout(
        f"no SDK-mode acknowledgement from {endpoint.drone_addr} "
        f"after {endpoint.max_retries} attempts"
    )
