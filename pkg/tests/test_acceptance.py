"""Acceptance suite: one test per release criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines.
"""

import json
import re
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

import reference as ref
from conftest import loopback_endpoint, random_gray, random_rgb
from fanet_gcs import imaging
from fanet_gcs.capture import SnapshotStore, decode_frame_record, load_image, save_image
from fanet_gcs.link import CommandFrame, encode_command, parse_response
from fanet_gcs.mission import build_square_mission, connect_with_retry, execute_mission
from fanet_gcs.service import ServiceConfig, create_app
from fanet_gcs.sim import (
    Checkerboard,
    DroneSim,
    NoiseSpec,
    Phase,
    SimConfig,
    SimDroneState,
    SimScene,
    StepEdge,
    inject_noise,
    render_frame,
)
from test_link import GOLDEN_WIRE, assert_serialized


def _verdict(name: str, ok: bool, extra: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({extra})" if extra else ""
    print(f"ACCEPTANCE {tag}: {name}{suffix}")
    assert ok, name


# 1 -------------------------------------------------------------------------------

def test_size_formula():
    ok = imaging.raw_image_bits(128, 128, 24) == 393_216
    _verdict("size formula 128x128x24 = 393,216 bits", ok)


# 2 -------------------------------------------------------------------------------

def _sizes(rng, n, lo=1):
    return [(int(rng.integers(lo, 33)), int(rng.integers(lo, 33))) for _ in range(n)]


def test_imaging_oracle_suite():
    rng = np.random.default_rng(424242)
    t0 = time.monotonic()

    for w, h in _sizes(rng, 100):
        img = random_rgb(rng, w, h)
        assert imaging.rgb_to_gray(img) == ref.ref_rgb_to_gray(img)

    for i, (w, h) in enumerate(_sizes(rng, 100)):
        img = random_rgb(rng, w, h) if i % 2 else random_gray(rng, w, h)
        assert imaging.complement(img) == ref.ref_complement(img)
        assert imaging.complement(imaging.complement(img)) == img  # involution

    for w, h in _sizes(rng, 100):
        img = random_gray(rng, w, h)
        hist = imaging.histogram(img)
        assert hist.bins == ref.ref_histogram_bins(img)
        assert sum(hist.bins) == w * h  # bins always sum to the pixel count

    adjust_params = [(0.0, 1.0, 1.0), (0.2, 0.8, 1.0), (0.0, 1.0, 0.5), (0.1, 0.9, 2.2)]
    for i, (w, h) in enumerate(_sizes(rng, 100)):
        img = random_gray(rng, w, h)
        low, high, gamma = adjust_params[i % len(adjust_params)]
        assert imaging.gray_adjust(img, low, high, gamma) == ref.ref_gray_adjust(
            img, low, high, gamma
        )

    for kind in ("mean", "median"):
        for i, (w, h) in enumerate(_sizes(rng, 100, lo=5)):
            k = 5 if i % 3 == 0 else 3
            img = random_gray(rng, w, h)
            assert imaging.noise_filter(img, kind, k) == ref.ref_noise_filter(img, kind, k)

    fracs = [0.25, 0.1, 0.5, 0.9]
    for operator in ("sobel", "prewitt"):
        for i, (w, h) in enumerate(_sizes(rng, 100, lo=3)):
            img = random_gray(rng, w, h)
            frac = fracs[i % len(fracs)]
            out = imaging.edge_detect(img, operator, threshold_frac=frac)
            assert out == ref.ref_edge_gradient(img, operator, frac)
            assert out.is_binary()

    for w, h in _sizes(rng, 100, lo=3):
        img = random_gray(rng, w, h)
        out = imaging.edge_detect(img, "canny")
        assert out == ref.ref_edge_canny(img, 1.4, 0.1, 0.3)
        assert out.is_binary()

    for i, (w, h) in enumerate(_sizes(rng, 100)):
        img = random_rgb(rng, w, h) if i % 2 else random_gray(rng, w, h)
        turns = i % 4
        assert imaging.rotate_quarter(img, turns) == ref.ref_rotate_quarter(img, turns)
        rolled = img
        for _ in range(4):
            rolled = imaging.rotate_quarter(rolled, 1)
        assert rolled == img  # rotation group property

    elapsed = time.monotonic() - t0
    _verdict(
        "imaging ops bit-exact vs naive reference on 100+ images each, properties hold",
        elapsed < 10.0,
        f"{elapsed:.1f}s",
    )


# 3 -------------------------------------------------------------------------------

def test_protocol_conformance():
    t0 = time.monotonic()
    for cmd, wire in GOLDEN_WIRE:
        assert encode_command(cmd) == wire

    drone = DroneSim(SimConfig(cmd_port=0)).start()
    try:
        session = connect_with_retry(loopback_endpoint(drone), 3)
        script = [
            CommandFrame.takeoff(),
            CommandFrame.forward(50),
            CommandFrame.forward(50),
            CommandFrame.rotate_cw(90),
            CommandFrame.rotate_ccw(90),
            CommandFrame.stream_on(),
            CommandFrame.query_battery(),
            CommandFrame.stream_off(),
            CommandFrame.land(),
        ]
        for cmd in script:
            session.send_command(cmd)  # raises if the reply does not parse
        for event in session.event_log:
            if event.direction == "in":
                assert parse_response(event.payload) is not None
        assert_serialized(session.event_log)
        session.close()
    finally:
        drone.stop()
    elapsed = time.monotonic() - t0
    _verdict(
        "wire table golden + loopback round trips + one-in-flight serialization",
        elapsed < 5.0,
        f"{elapsed:.1f}s",
    )


# 4 -------------------------------------------------------------------------------

def test_algorithm_conformance_square_mission(tmp_path):
    t0 = time.monotonic()
    drone = DroneSim(SimConfig(cmd_port=0, fps=20.0)).start()
    store = SnapshotStore(tmp_path)
    from test_mission import streaming_session

    session, buffer, listener = streaming_session(drone)
    initial = drone.state()
    try:
        report = execute_mission(
            session,
            build_square_mission(100, settle_ms=500),
            frames=buffer.latest,
            sink=lambda f: store.snap(f, mission="square-100").id,
        )
    finally:
        listener.stop()
        session.close()
    final = drone.stop()

    elapsed = time.monotonic() - t0
    kinds = " ".join(report.event_kinds())
    ok = (
        report.status == "completed"
        and re.fullmatch(r"connect(?: (?:fly|capture|wait))* stop", kinds) is not None
        and report.frames_captured == 4
        and len(store.list()) == 4
        and (final.x, final.y, final.heading) == (initial.x, initial.y, initial.heading)
        and final.phase is Phase.GROUNDED
        and elapsed < 30.0
    )
    _verdict(
        "square(100): completed, connect->steps->stop, 4 snapshots, pose closure",
        ok,
        f"{elapsed:.1f}s with settle waits",
    )


# 5 -------------------------------------------------------------------------------

def test_denoising_efficacy():
    pose = SimDroneState(
        phase=Phase.FLYING, x=0, y=0, heading=0, altitude=100,
        battery=100, sdk_mode=True, streaming=True,
    )
    scene = SimScene(Checkerboard(cell_px=16), (64, 64))
    clean_gray = imaging.rgb_to_gray(render_frame(pose, scene)).to_array()
    worst_median = 1.0
    for seed in (11, 22, 33, 44, 55):
        noisy = inject_noise(render_frame(pose, scene), NoiseSpec("salt_pepper", p=0.05, seed=seed))
        noisy_gray = imaging.rgb_to_gray(noisy)
        median_frac = (imaging.noise_filter(noisy_gray, "median", 3).to_array() == clean_gray).mean()
        mean_frac = (imaging.noise_filter(noisy_gray, "mean", 3).to_array() == clean_gray).mean()
        assert mean_frac < median_frac, "mean filter should restore strictly fewer pixels"
        worst_median = min(worst_median, median_frac)
    _verdict(
        "salt&pepper p=0.05: median k=3 restores >=99%, mean strictly fewer",
        worst_median >= 0.99,
        f"worst median restoration {worst_median:.4f}",
    )


# 6 -------------------------------------------------------------------------------

def test_edge_ground_truth_step_scene():
    pose = SimDroneState(
        phase=Phase.FLYING, x=0, y=0, heading=0, altitude=100,
        battery=100, sdk_mode=True, streaming=True,
    )
    scene = SimScene(StepEdge(column=8, left_val=0, right_val=255), (16, 16))
    gray = imaging.rgb_to_gray(render_frame(pose, scene))
    edges = imaging.edge_detect(gray, "sobel", threshold_frac=0.5).to_array().copy()
    ok = bool((edges[:, 7] == 255).all() and (edges[:, 8] == 255).all())
    edges[:, 7] = 0
    edges[:, 8] = 0
    ok = ok and bool((edges == 0).all())
    _verdict("step-edge scene: sobel marks exactly the two step-adjacent columns", ok)


# 7 -------------------------------------------------------------------------------

def test_persistence(tmp_path):
    rng = np.random.default_rng(99)
    for i in range(50):
        img = random_rgb(rng, int(rng.integers(1, 33)), int(rng.integers(1, 33)))
        path = tmp_path / f"rt{i}.ppm"
        save_image(img, path)
        assert load_image(path) == img

    data_dir = tmp_path / "svc"
    cfg = ServiceConfig(
        sim_mode=True, data_dir=data_dir, fps=30.0, settle_ms=0,
        reply_timeout_ms=1000, connect_attempts=2,
        scene=SimScene(Checkerboard(cell_px=16), (32, 32)),
    )
    with TestClient(create_app(cfg)) as client:
        client.post("/connect")
        client.post("/stream/on")
        deadline = time.monotonic() + 3.0
        while not client.get("/state").json()["latest_seq"] and time.monotonic() < deadline:
            time.sleep(0.02)
        snap_id = client.post("/snap").json()["id"]
        client.post(
            "/process",
            json={"snapshot_id": snap_id, "pipeline": [{"op": "rgb2gray"}, {"op": "histogram"}]},
        )
        before = client.get("/snapshots").json()

    cfg2 = ServiceConfig(sim_mode=True, data_dir=data_dir, fps=30.0, settle_ms=0)
    with TestClient(create_app(cfg2)) as client:
        after = client.get("/snapshots").json()
    ok = after == before and len(after) == 2 and after[1]["lineage"] == [
        {"op": "rgb2gray"},
        {"op": "histogram"},
    ]
    _verdict("PPM round-trip x50 byte-exact; restart re-lists snapshots with lineage", ok)


# 8 -------------------------------------------------------------------------------

def test_api_suite(tmp_path):
    cfg = ServiceConfig(
        sim_mode=True, data_dir=tmp_path, fps=5.0, settle_ms=0,
        reply_timeout_ms=1000, connect_attempts=2,
        scene=SimScene(Checkerboard(cell_px=16), (64, 64)),
    )
    with TestClient(create_app(cfg)) as client:
        # connect contract
        assert client.post("/mission/square", json={"side_cm": 100}).status_code == 409
        first = client.post("/connect")
        assert first.status_code == 200 and first.json()["sdk_mode"] is True
        assert client.post("/connect").status_code == 400

        # snap contract
        assert client.post("/snap").status_code == 409
        client.post("/stream/on")
        deadline = time.monotonic() + 3.0
        while not client.get("/state").json()["latest_seq"] and time.monotonic() < deadline:
            time.sleep(0.02)
        snap_id = client.post("/snap").json()["id"]
        assert client.get(f"/snapshots/{snap_id}").content.startswith(b"P6\n")
        assert client.get("/snapshots/snap-000999").status_code == 404

        # mission contract
        assert client.post("/mission/square", json={"side_cm": 5}).status_code == 400
        report = client.post("/mission/square", json={"side_cm": 100}).json()
        assert report["status"] == "completed" and report["frames_captured"] == 4

        # process contract
        twice_src = client.post(
            "/process", json={"snapshot_id": snap_id, "pipeline": [{"op": "complement"}]}
        ).json()
        twice = client.post(
            "/process", json={"snapshot_id": twice_src["id"], "pipeline": [{"op": "complement"}]}
        ).json()
        assert (
            client.get(f"/snapshots/{twice['id']}").content
            == client.get(f"/snapshots/{snap_id}").content
        )
        mismatch = client.post(
            "/process",
            json={"snapshot_id": snap_id, "pipeline": [{"op": "edge", "operator": "sobel"}]},
        )
        assert mismatch.status_code == 400 and "step 1" in mismatch.json()["detail"]
        hist = client.post(
            "/process",
            json={"snapshot_id": snap_id, "pipeline": [{"op": "rgb2gray"}, {"op": "histogram"}]},
        ).json()
        assert sum(hist["histograms"][0]["bins"]) == 64 * 64

        # live stream contract at 5 fps: >= 4 frames per second, monotone seq
        frames = []
        telemetry = []
        with client.websocket_connect("/stream") as ws:
            t0 = time.monotonic()
            while time.monotonic() - t0 < 1.2:
                message = ws.receive()
                if message.get("bytes"):
                    frames.append(message["bytes"])
                elif message.get("text"):
                    telemetry.append(json.loads(message["text"]))
        assert len(frames) >= 4, f"only {len(frames)} frames in 1.2s at 5 fps"
        for record in frames:
            decode_frame_record(record)
        seqs = [t["seq"] for t in telemetry if "seq" in t]
        assert seqs == sorted(seqs)
        assert any(t["phase"] == "grounded" for t in telemetry)
    _verdict("every HTTP/WS endpoint contract holds against the sim-mode service", True)
