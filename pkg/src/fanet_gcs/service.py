"""Local HTTP + WebSocket surface composing link, sim, mission and store.

One service instance drives one drone. In sim mode an embedded simulator
is started on loopback ephemeral ports and the video path is wired to the
frame ingest listener automatically. All command traffic funnels through
a single executor lock, so the link session never has two commands in
flight regardless of how many HTTP clients poke at it.
"""

from __future__ import annotations

import asyncio
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import link, mission, pipeline
from .capture import (
    Frame,
    FrameBuffer,
    FrameIngestListener,
    SnapshotNotFound,
    SnapshotStore,
)
from .imaging import GrayImage, RgbImage, TypeMismatch
from .link import CommandFrame, ConnectTimeout, DroneError, LinkEndpoint, ReplyTimeout
from .pipeline import PipelineParseError
from .sim import DroneSim, NoiseSpec, Phase, SimConfig, SimScene


@dataclass
class ServiceConfig:
    sim_mode: bool = True
    drone_addr: tuple[str, int] = ("192.168.10.1", 8889)
    local_bind: tuple[str, int] = ("0.0.0.0", 9000)
    http_bind: tuple[str, int] = ("127.0.0.1", 8080)
    data_dir: Path = Path("./data")
    fps: float = 5.0
    settle_ms: int = 500
    reply_timeout_ms: int = 7000
    max_retries: int = 3
    connect_attempts: int = 3
    first_frame_wait_s: float = 5.0
    scene: SimScene = field(default_factory=SimScene)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    console_dir: Path | None = None


_STATUS = {
    "BadRequest": 400,
    "NotFound": 404,
    "NotConnected": 409,
    "NoFrameYet": 409,
    "DroneError": 502,
    "Timeout": 504,
}


class ApiError(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail
        self.status = _STATUS[code]


class GcsRuntime:
    """Owns the moving parts; endpoints are thin wrappers over its methods."""

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.store = SnapshotStore(cfg.data_dir)
        self.buffer = FrameBuffer()
        self.listener: FrameIngestListener | None = None
        self.sim: DroneSim | None = None
        self.session: link.LinkSession | None = None
        self._cmd_lock = threading.Lock()
        self._endpoint: LinkEndpoint | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self.listener = FrameIngestListener(self.buffer).start()
        if self.cfg.sim_mode:
            self.sim = DroneSim(
                SimConfig(
                    cmd_port=0,
                    video_port=self.listener.port,
                    fps=self.cfg.fps,
                    scene=self.cfg.scene,
                    noise=self.cfg.noise,
                )
            ).start()
            drone_addr = self.sim.cmd_addr
            local_bind = ("127.0.0.1", 0)
        else:
            drone_addr = self.cfg.drone_addr
            local_bind = self.cfg.local_bind
        self._endpoint = LinkEndpoint(
            drone_addr=drone_addr,
            local_bind=local_bind,
            reply_timeout_ms=self.cfg.reply_timeout_ms,
            max_retries=self.cfg.max_retries,
        )

    def stop(self) -> None:
        if self.session:
            self.session.close()
            self.session = None
        if self.sim:
            self.sim.stop()
        if self.listener:
            self.listener.stop()

    # -- command plumbing ----------------------------------------------------

    def _require_session(self) -> link.LinkSession:
        if self.session is None:
            raise ApiError("NotConnected", "connect first")
        return self.session

    def connect(self) -> dict[str, Any]:
        with self._cmd_lock:
            if self.session is not None:
                raise ApiError("BadRequest", "already connected")
            try:
                self.session = mission.connect_with_retry(
                    self._endpoint, self.cfg.connect_attempts
                )
            except ConnectTimeout as exc:
                raise ApiError("Timeout", str(exc)) from exc
            return {"sdk_mode": self.session.sdk_mode, "attempts": self.session.attempts}

    def execute(self, cmd: CommandFrame) -> link.ResponseFrame:
        with self._cmd_lock:
            return self._execute_locked(cmd)

    def _execute_locked(self, cmd: CommandFrame) -> link.ResponseFrame:
        session = self._require_session()
        try:
            return session.send_command(cmd)
        except DroneError as exc:
            raise ApiError("DroneError", exc.text) from exc
        except ReplyTimeout as exc:
            raise ApiError("Timeout", str(exc)) from exc
        except link.LinkError as exc:
            raise ApiError("BadRequest", str(exc)) from exc

    def set_streaming(self, on: bool) -> None:
        cmd = CommandFrame.stream_on() if on else CommandFrame.stream_off()
        self.execute(cmd)

    def _await_first_frame(self) -> None:
        deadline = time.monotonic() + self.cfg.first_frame_wait_s
        while self.buffer.latest() is None:
            if time.monotonic() > deadline:
                raise ApiError("Timeout", "no frame arrived after streamon")
            time.sleep(0.02)

    # -- operations ----------------------------------------------------------

    def run_square(self, side_cm: int) -> mission.MissionReport:
        try:
            plan = mission.build_square_mission(side_cm, settle_ms=self.cfg.settle_ms)
        except mission.SideOutOfRange as exc:
            raise ApiError("BadRequest", str(exc)) from exc
        return self._run_plan(plan)

    def run_script(self, text: str, name: str = "script") -> mission.MissionReport:
        try:
            plan = mission.parse_script(text, name=name)
        except mission.InvalidPlan as exc:
            raise ApiError("BadRequest", str(exc)) from exc
        return self._run_plan(plan)

    def _run_plan(self, plan: mission.MissionPlan) -> mission.MissionReport:
        wants_frames = any(isinstance(s, mission.Capture) for s in plan.steps)
        with self._cmd_lock:
            session = self._require_session()
            if wants_frames:
                try:
                    session.send_command(CommandFrame.stream_on())
                except link.LinkError as exc:
                    raise ApiError("DroneError", f"streamon refused: {exc}") from exc
                self._await_first_frame()
            return mission.execute_mission(
                session,
                plan,
                frames=self.buffer.latest,
                sink=lambda f: self.store.snap(f, mission=plan.name).id,
            )

    def snap(self) -> dict[str, Any]:
        frame = self.buffer.latest()
        if frame is None:
            raise ApiError("NoFrameYet", "no frame ingested yet; is streaming on?")
        snapshot = self.store.snap(frame, mission="manual")
        return self.store.metadata(snapshot.id)

    def process(self, snapshot_id: str, pipeline_spec: list[dict[str, Any]]) -> dict[str, Any]:
        try:
            source_meta = self.store.metadata(snapshot_id)
            image = self.store.image(snapshot_id)
        except SnapshotNotFound as exc:
            raise ApiError("NotFound", f"no snapshot {snapshot_id}") from exc
        try:
            ops = pipeline.parse_pipeline(pipeline_spec)
            result = pipeline.apply_pipeline(image, ops)
        except PipelineParseError as exc:
            raise ApiError("BadRequest", str(exc)) from exc
        except TypeMismatch as exc:
            raise ApiError("BadRequest", str(exc)) from exc
        out = result.image
        if isinstance(out, GrayImage):  # store is RGB on disk; gray lifts losslessly
            out = RgbImage.from_array(np.repeat(out.to_array()[..., None], 3, axis=2))
        lineage = tuple(source_meta.get("lineage", [])) + tuple(
            e.op for e in result.lineage
        )
        snapshot = self.store.snap(
            Frame(
                image=out,
                seq=source_meta.get("seq", 0),
                timestamp_ms=source_meta.get("timestamp_ms", 0),
            ),
            mission=source_meta.get("mission", "manual"),
            lineage=lineage,
        )
        reply = self.store.metadata(snapshot.id)
        reply["source"] = snapshot_id
        histograms = [
            {"step": step, "bins": list(h.bins)} for step, h in result.histograms()
        ]
        if histograms:
            reply["histograms"] = histograms
        return reply

    def telemetry(self) -> dict[str, Any] | None:
        if self.sim is None:
            return None
        st = self.sim.state()
        latest = self.buffer.latest()
        return {
            "phase": st.phase.value,
            "position": [st.x, st.y],
            "heading": st.heading,
            "altitude": st.altitude,
            "battery": st.battery,
            "streaming": st.streaming,
            "seq": latest.seq if latest else 0,
        }

    def state(self) -> dict[str, Any]:
        latest = self.buffer.latest()
        return {
            "connected": self.session is not None,
            "sdk_mode": bool(self.session and self.session.sdk_mode),
            "frames_ingested": self.buffer.ingested,
            "latest_seq": latest.seq if latest else None,
            "telemetry": self.telemetry(),
        }


def _report_json(report: mission.MissionReport) -> dict[str, Any]:
    return {
        "mission": report.mission,
        "status": report.status,
        "abort_reason": report.abort_reason,
        "frames_captured": report.frames_captured,
        "events": [asdict(e) for e in report.events],
    }


def create_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    runtime = GcsRuntime(cfg)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        runtime.start()
        try:
            yield
        finally:
            runtime.stop()

    app = FastAPI(title="fanet-gcs", version="0.1.0", lifespan=lifespan)
    app.state.runtime = runtime

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "detail": exc.detail}
        )

    @app.post("/connect")
    def connect() -> dict[str, Any]:
        return runtime.connect()

    @app.get("/state")
    def state() -> dict[str, Any]:
        return runtime.state()

    @app.post("/stream/on")
    def stream_on() -> dict[str, Any]:
        runtime.set_streaming(True)
        return {"streaming": True}

    @app.post("/stream/off")
    def stream_off() -> dict[str, Any]:
        runtime.set_streaming(False)
        return {"streaming": False}

    @app.post("/command")
    def command(body: dict[str, Any]) -> dict[str, Any]:
        line = body.get("command", "")
        try:
            cmd = link.parse_command(str(line))
        except link.LinkError as exc:
            raise ApiError("BadRequest", str(exc)) from exc
        resp = runtime.execute(cmd)
        return {"outcome": "ok", "value": resp.value}

    @app.post("/mission/square")
    def mission_square(body: dict[str, Any]) -> dict[str, Any]:
        side = body.get("side_cm")
        if not isinstance(side, int):
            raise ApiError("BadRequest", "body must carry integer side_cm")
        return _report_json(runtime.run_square(side))

    @app.post("/mission/script")
    def mission_script(body: dict[str, Any]) -> dict[str, Any]:
        text = body.get("script")
        if not isinstance(text, str):
            raise ApiError("BadRequest", "body must carry a script string")
        name = body.get("name", "script")
        return _report_json(runtime.run_script(text, name=str(name)))

    @app.post("/snap")
    def snap() -> dict[str, Any]:
        return runtime.snap()

    @app.get("/snapshots")
    def snapshots() -> list[dict[str, Any]]:
        return runtime.store.list()

    @app.get("/snapshots/{snap_id}")
    def snapshot_bytes(snap_id: str) -> Response:
        path = runtime.store.image_path(snap_id)
        if not path.exists():
            raise ApiError("NotFound", f"no snapshot {snap_id}")
        return Response(
            content=path.read_bytes(), media_type="image/x-portable-pixmap"
        )

    @app.post("/process")
    def process(body: dict[str, Any]) -> dict[str, Any]:
        snap_id = body.get("snapshot_id")
        spec = body.get("pipeline")
        if not isinstance(snap_id, str) or not isinstance(spec, list):
            raise ApiError("BadRequest", "body must carry snapshot_id and pipeline[]")
        return runtime.process(snap_id, spec)

    @app.websocket("/stream")
    async def stream(ws: WebSocket) -> None:
        await ws.accept()
        last_seq = 0
        last_telemetry = 0.0
        try:
            while True:
                latest = runtime.buffer.latest_record()
                if latest is not None and latest[0].seq > last_seq:
                    last_seq = latest[0].seq
                    await ws.send_bytes(latest[1])
                now = time.monotonic()
                if now - last_telemetry >= 0.25:
                    last_telemetry = now
                    telem = runtime.telemetry()
                    if telem is not None:
                        await ws.send_json({"type": "telemetry", **telem})
                await asyncio.sleep(0.01)
        except (WebSocketDisconnect, RuntimeError):
            return

    if cfg.console_dir and Path(cfg.console_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=cfg.console_dir, html=True), name="console")

    return app
