"""Mission scripts: build them, serialize them, execute them over a link.

A plan is an ordered list of Fly / Capture / Wait steps. Execution is a
single sequential pass: flight commands go over the session, Capture pulls
the newest frame from a frame source and hands it to a snapshot sink, and
every run closes with a terminal "stop" event whether it completed or was
aborted mid-air.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

from . import link
from .capture import Frame
from .link import (
    CommandFrame,
    CommandKind,
    ConnectTimeout,
    DroneError,
    LinkEndpoint,
    LinkSession,
    ReplyTimeout,
    open_session,
)

log = logging.getLogger(__name__)

MAX_LEG_CM = 1000  # the surveyed area keeps every straight run to 10 m
MAX_SINGLE_TRANSLATION = link.TRANSLATION_RANGE[1]


class MissionError(Exception):
    pass


class SideOutOfRange(MissionError):
    pass


class InvalidPlan(MissionError):
    pass


@dataclass(frozen=True)
class Fly:
    cmd: CommandFrame

    def describe(self) -> str:
        word = self.cmd.kind.value
        if self.cmd.magnitude is not None:
            return f"fly {word} {self.cmd.magnitude}"
        return f"fly {word}"


@dataclass(frozen=True)
class Capture:
    def describe(self) -> str:
        return "capture"


@dataclass(frozen=True)
class Wait:
    ms: int

    def describe(self) -> str:
        return f"wait {self.ms}"


MissionStep = Fly | Capture | Wait

MOTION_KINDS = (
    frozenset({CommandKind.TAKEOFF}) | link.TRANSLATION_KINDS | link.ROTATION_KINDS
)


@dataclass
class MissionPlan:
    name: str
    steps: list[MissionStep] = field(default_factory=list)

    def validate(self) -> None:
        """Reject plans that could not run safely.

        The first flight command must be a takeoff, a landing must follow
        the last motion, captures need a prior takeoff, and no straight leg
        may run past MAX_LEG_CM.
        """
        flys = [(i, s) for i, s in enumerate(self.steps) if isinstance(s, Fly)]
        if flys and flys[0][1].cmd.kind is not CommandKind.TAKEOFF:
            raise InvalidPlan("the first flight command must be takeoff")
        motions = [i for i, s in flys if s.cmd.kind in MOTION_KINDS]
        if motions:
            lands_after = [
                i for i, s in flys if s.cmd.kind is CommandKind.LAND and i > motions[-1]
            ]
            if not lands_after:
                raise InvalidPlan("a land step must follow the last motion")
        takeoff_idx = flys[0][0] if flys else None
        for i, s in enumerate(self.steps):
            if isinstance(s, Capture) and (takeoff_idx is None or i < takeoff_idx):
                raise InvalidPlan("capture steps must come after takeoff")
            if isinstance(s, Wait) and s.ms < 0:
                raise InvalidPlan(f"negative wait at step {i + 1}")
        self._check_legs()

    def _check_legs(self) -> None:
        leg_kind: CommandKind | None = None
        leg_total = 0
        for s in self.steps:
            if not isinstance(s, Fly):
                continue  # waits and captures do not break a straight run
            kind = s.cmd.kind
            if kind in link.TRANSLATION_KINDS:
                if kind is leg_kind:
                    leg_total += s.cmd.magnitude
                else:
                    leg_kind, leg_total = kind, s.cmd.magnitude
                if leg_total > MAX_LEG_CM:
                    raise InvalidPlan(
                        f"straight {kind.value} leg of {leg_total} cm exceeds {MAX_LEG_CM} cm"
                    )
            else:
                leg_kind, leg_total = None, 0


def _split_leg(side_cm: int) -> list[int]:
    if side_cm <= MAX_SINGLE_TRANSLATION:
        return [side_cm]
    first = (side_cm + 1) // 2
    return [first, side_cm - first]


def build_square_mission(side_cm: int, settle_ms: int = 500) -> MissionPlan:
    """Takeoff, four (forward, capture, clockwise-90) legs, land.

    Legs longer than one command allows are split in two. A settle wait
    follows each motion; pass ``settle_ms=0`` to pace flat out.
    """
    if not (20 <= side_cm <= MAX_LEG_CM):
        raise SideOutOfRange(f"side must be within [20, {MAX_LEG_CM}] cm, got {side_cm}")
    steps: list[MissionStep] = []

    def motion(cmd: CommandFrame) -> None:
        steps.append(Fly(cmd))
        if settle_ms > 0:
            steps.append(Wait(settle_ms))

    motion(CommandFrame.takeoff())
    for _ in range(4):
        for chunk in _split_leg(side_cm):
            motion(CommandFrame.forward(chunk))
        steps.append(Capture())
        motion(CommandFrame.rotate_cw(90))
    motion(CommandFrame.land())
    plan = MissionPlan(name=f"square-{side_cm}", steps=steps)
    plan.validate()
    return plan


# -- text script form -------------------------------------------------------

def format_script(plan: MissionPlan) -> str:
    """One step per line: the wire word, ``capture``, or ``wait <ms>``."""
    lines = []
    for s in plan.steps:
        if isinstance(s, Fly):
            lines.append(link.encode_command(s.cmd).decode("ascii"))
        elif isinstance(s, Capture):
            lines.append("capture")
        else:
            lines.append(f"wait {s.ms}")
    return "\n".join(lines) + "\n"


def parse_script(text: str, name: str = "script") -> MissionPlan:
    """Inverse of format_script; blank lines and # comments are skipped."""
    steps: list[MissionStep] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "capture":
            steps.append(Capture())
        elif parts[0] == "wait":
            try:
                steps.append(Wait(int(parts[1])))
            except (IndexError, ValueError) as exc:
                raise InvalidPlan(f"line {lineno}: bad wait {line!r}") from exc
        else:
            try:
                steps.append(Fly(link.parse_command(line)))
            except link.LinkError as exc:
                raise InvalidPlan(f"line {lineno}: {exc}") from exc
    plan = MissionPlan(name=name, steps=steps)
    plan.validate()
    return plan


# -- execution ---------------------------------------------------------------

@dataclass(frozen=True)
class MissionEvent:
    timestamp: float
    step: str
    outcome: str


@dataclass
class MissionReport:
    mission: str
    events: list[MissionEvent] = field(default_factory=list)
    frames_captured: int = 0
    status: str = "completed"  # "completed" | "aborted"
    abort_reason: str | None = None

    def event_kinds(self) -> list[str]:
        """First word of each event label, e.g. connect/fly/capture/wait/stop."""
        return [e.step.split()[0] for e in self.events]


FrameSource = Callable[[], Frame | None]
SnapshotSink = Callable[[Frame], str]


def execute_mission(
    session: LinkSession,
    plan: MissionPlan,
    frames: FrameSource,
    sink: SnapshotSink,
) -> MissionReport:
    """Run the plan start to finish; failures abort, nothing escapes.

    A flight command that times out or is refused aborts the mission: a
    best-effort land is issued and the report says where it failed. A
    capture with no frame available is logged and skipped, not fatal.
    """
    plan.validate()
    report = MissionReport(mission=plan.name)

    def record(step: str, outcome: str) -> None:
        report.events.append(MissionEvent(time.time(), step, outcome))

    record("connect", "ok")
    for s in plan.steps:
        if isinstance(s, Fly):
            try:
                session.send_command(s.cmd)
                record(s.describe(), "ok")
            except (DroneError, ReplyTimeout) as exc:
                outcome = "timeout" if isinstance(exc, ReplyTimeout) else f"error {exc.text}"
                record(s.describe(), outcome)
                _abort(session, report, f"{s.describe()} failed: {outcome}")
                return report
        elif isinstance(s, Capture):
            frame = frames()
            if frame is None:
                record("capture", "no-frame")
                continue
            try:
                snap_id = sink(frame)
            except Exception as exc:  # sink trouble must not crash the flight
                record("capture", f"sink-error {exc}")
                continue
            report.frames_captured += 1
            record("capture", f"captured {snap_id}")
        else:
            time.sleep(s.ms / 1000.0)
            record(s.describe(), "ok")
    record("stop", "ok")
    return report


def _abort(session: LinkSession, report: MissionReport, reason: str) -> None:
    report.status = "aborted"
    report.abort_reason = reason
    try:
        session.send_command(CommandFrame.land())
        report.events.append(MissionEvent(time.time(), "fly land", "ok (abort)"))
    except link.LinkError as exc:
        report.events.append(MissionEvent(time.time(), "fly land", f"abort-land failed: {exc}"))
    report.events.append(MissionEvent(time.time(), "stop", "aborted"))


def connect_with_retry(endpoint: LinkEndpoint, attempts: int) -> LinkSession:
    """Open a session, retrying the whole handshake up to ``attempts`` times."""
    if attempts < 1:
        raise ValueError("attempts must be at least 1")
    for attempt in range(1, attempts + 1):
        try:
            session = open_session(endpoint)
            session.attempts = (attempt - 1) * endpoint.max_retries + session.attempts
            log.info("connected to %s on attempt %d", endpoint.drone_addr, attempt)
            return session
        except ConnectTimeout:
            log.info("connect attempt %d/%d timed out", attempt, attempts)
    raise ConnectTimeout(f"all {attempts} connection attempts timed out")
