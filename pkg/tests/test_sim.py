import socket
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanet_gcs import sim as simmod
from fanet_gcs.capture import decode_frame_record
from fanet_gcs.link import CommandFrame, CommandKind, ResponseKind, open_session
from fanet_gcs.sim import (
    Checkerboard,
    DroneSim,
    NoiseSpec,
    Phase,
    SimConfig,
    SimDroneState,
    SimScene,
    StepEdge,
    StreamOff,
    Uniform,
    inject_noise,
    render_frame,
    step_command,
)

from conftest import loopback_endpoint

CFG = SimConfig()


def flying_state(**kw):
    base = dict(
        phase=Phase.FLYING, x=500, y=500, heading=0, altitude=100, battery=100,
        sdk_mode=True, streaming=False,
    )
    base.update(kw)
    return SimDroneState(**base)


def run(st0, *cmds):
    state = st0
    replies = []
    for cmd in cmds:
        state, resp = step_command(state, cmd, CFG)
        replies.append(resp)
    return state, replies


# -- transition table ---------------------------------------------------------

def test_takeoff_from_ground():
    st0 = SimDroneState(sdk_mode=True)
    st1, (resp,) = run(st0, CommandFrame.takeoff())
    assert resp.is_ok
    assert st1.phase is Phase.FLYING
    assert st1.altitude == CFG.default_takeoff_alt


def test_forward_moves_along_heading():
    st0 = flying_state(heading=0)
    st1, (resp,) = run(st0, CommandFrame.forward(100))
    assert resp.is_ok
    assert (st1.x, st1.y) == (st0.x, st0.y + 100)


def test_four_right_angles_cancel():
    st = flying_state()
    for _ in range(4):
        st, (resp,) = run(st, CommandFrame.rotate_cw(90))
        assert resp.is_ok
    assert st.heading == flying_state().heading


def test_sdk_mode_gate():
    st0 = SimDroneState()
    st1, (resp,) = run(st0, CommandFrame.takeoff())
    assert resp.kind is ResponseKind.ERROR
    assert st1 == st0
    st2, (resp2,) = run(st0, CommandFrame.enter_sdk_mode())
    assert resp2.is_ok and st2.sdk_mode


def test_motion_refused_on_ground():
    st0 = SimDroneState(sdk_mode=True)
    for cmd in (CommandFrame.forward(100), CommandFrame.rotate_cw(90), CommandFrame.land()):
        st1, (resp,) = run(st0, cmd)
        assert resp.kind is ResponseKind.ERROR
        assert st1 == st0


def test_double_takeoff_refused():
    st1, (resp,) = run(flying_state(), CommandFrame.takeoff())
    assert resp.kind is ResponseKind.ERROR


def test_land_restores_ground():
    st1, (resp,) = run(flying_state(), CommandFrame.land())
    assert resp.is_ok
    assert st1.phase is Phase.GROUNDED and st1.altitude == 0


def test_arena_bound_blocks_exit():
    st0 = flying_state(x=950, y=500, heading=90)
    st1, (resp,) = run(st0, CommandFrame.forward(100))
    assert resp.kind is ResponseKind.ERROR
    assert (st1.x, st1.y) == (st0.x, st0.y)


def test_down_below_ground_refused():
    st0 = flying_state(altitude=50)
    st1, (resp,) = run(st0, CommandFrame(CommandKind.DOWN, 60))
    assert resp.kind is ResponseKind.ERROR
    assert st1.altitude == 50


def test_battery_query_and_drain():
    st0 = flying_state(battery=90)
    st1, (resp,) = run(st0, CommandFrame.query_battery())
    assert resp == simmod.ResponseFrame.of_value(90)
    assert st1.battery == 90  # queries are free
    st2, _ = run(st0, CommandFrame.forward(100))
    assert st2.battery == 89


@given(
    st.lists(
        st.one_of(
            st.sampled_from(
                [CommandFrame.takeoff(), CommandFrame.land(), CommandFrame.stream_on(),
                 CommandFrame.query_battery(), CommandFrame.rotate_cw(90)]
            ),
            st.builds(CommandFrame.forward, st.integers(20, 500)),
        ),
        max_size=30,
    )
)
@settings(max_examples=60)
def test_guard_safety_grounded_means_zero_altitude(cmds):
    state = SimDroneState(sdk_mode=True)
    battery = state.battery
    for cmd in cmds:
        state, _ = step_command(state, cmd, CFG)
        if state.phase is Phase.GROUNDED:
            assert state.altitude == 0
        assert 0 <= state.heading < 360
        assert state.battery <= battery
        battery = state.battery


@given(st.integers(20, 250), st.integers(0, 3))
@settings(max_examples=40)
def test_square_closure_from_any_cardinal_heading(side, quarter):
    state = flying_state(heading=90 * quarter)
    for _ in range(4):
        state, (r1,) = run(state, CommandFrame.forward(side))
        state, (r2,) = run(state, CommandFrame.rotate_cw(90))
        assert r1.is_ok and r2.is_ok
    assert (state.x, state.y, state.heading) == (500, 500, 90 * quarter)


# -- rendering ------------------------------------------------------------------

def test_render_uniform():
    st0 = flying_state(streaming=True)
    img = render_frame(st0, SimScene(Uniform(128), (16, 8)))
    assert img.width == 16 and img.height == 8
    assert set(img.pixels) == {128}


def test_render_requires_streaming():
    with pytest.raises(StreamOff):
        render_frame(flying_state(streaming=False), SimScene())


def test_render_checkerboard_cells():
    st0 = flying_state(streaming=True, x=0, y=0)
    scene = SimScene(Checkerboard(cell_px=8, color_a=(9, 9, 9), color_b=(200, 200, 200)), (32, 16))
    arr = render_frame(st0, scene).to_array()
    assert tuple(arr[0, 0]) == (9, 9, 9)
    assert tuple(arr[0, 8]) == (200, 200, 200)
    assert tuple(arr[8, 8]) == (9, 9, 9)


def test_render_step_edge_follows_pose():
    scene = SimScene(StepEdge(column=4, left_val=0, right_val=255), (8, 8))
    arr = render_frame(flying_state(streaming=True, x=0), scene).to_array()
    assert (arr[:, :4] == 0).all() and (arr[:, 4:] == 255).all()
    shifted = render_frame(flying_state(streaming=True, x=2), scene).to_array()
    assert (shifted[:, :2] == 0).all() and (shifted[:, 2:] == 255).all()


def test_render_is_pure():
    st0 = flying_state(streaming=True, x=123, y=77)
    scene = SimScene(Checkerboard(cell_px=5), (24, 24))
    assert render_frame(st0, scene) == render_frame(st0, scene)


# -- noise ------------------------------------------------------------------------

def _checker_frame():
    return render_frame(
        flying_state(streaming=True, x=0, y=0), SimScene(Checkerboard(cell_px=8), (64, 64))
    )


def test_salt_pepper_zero_probability_is_identity():
    img = _checker_frame()
    assert inject_noise(img, NoiseSpec("salt_pepper", p=0.0, seed=1)) == img


def test_salt_pepper_full_probability_saturates():
    img = _checker_frame()
    out = inject_noise(img, NoiseSpec("salt_pepper", p=1.0, seed=1))
    assert set(out.pixels) <= {0, 255}


def test_salt_pepper_hits_expected_fraction():
    img = render_frame(
        flying_state(streaming=True), SimScene(Uniform(128), (64, 64))
    )
    fractions = []
    for seed in range(20):
        out = inject_noise(img, NoiseSpec("salt_pepper", p=0.05, seed=seed))
        diff = np.any(out.to_array() != img.to_array(), axis=2)
        fractions.append(diff.mean())
    assert abs(float(np.mean(fractions)) - 0.05) < 0.02


def test_noise_is_reproducible():
    img = _checker_frame()
    spec = NoiseSpec("additive_gaussian", sigma=10.0, seed=42)
    assert inject_noise(img, spec) == inject_noise(img, spec)


def test_gaussian_blur_smooths():
    img = _checker_frame()
    out = inject_noise(img, NoiseSpec("gaussian_blur", sigma=1.0, seed=0))
    assert out.width == img.width
    assert len(set(out.pixels)) > 2  # edges smeared into intermediate levels


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("salt_pepper", p=1.5)
    with pytest.raises(ValueError):
        NoiseSpec("sparkle")


# -- the serving endpoint -----------------------------------------------------------

def test_serve_session_cycle(sim):
    with open_session(loopback_endpoint(sim)) as session:
        assert session.sdk_mode
    assert sim.state().sdk_mode


def test_serve_conformance_all_wire_words(sim):
    """Every word in the wire table gets a parseable reply."""
    from fanet_gcs.link import parse_response

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("127.0.0.1", 0))
    sock.settimeout(2.0)
    words = [b"command", b"takeoff", b"forward 100", b"back 20", b"left 20",
             b"right 20", b"up 30", b"down 30", b"cw 90", b"ccw 90",
             b"streamon", b"streamoff", b"battery?", b"land"]
    for word in words:
        sock.sendto(word, sim.cmd_addr)
        data, _ = sock.recvfrom(2048)
        parse_response(data)  # must not raise
    sock.close()


def test_serve_answers_concurrent_clients(sim):
    socks = []
    for _ in range(2):
        s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        s.bind(("127.0.0.1", 0))
        s.settimeout(2.0)
        socks.append(s)
    for s in socks:
        s.sendto(b"command", sim.cmd_addr)
    for s in socks:
        data, _ = s.recvfrom(2048)
        assert data == b"ok"
        s.close()


def test_stop_while_flying_keeps_final_state():
    drone = DroneSim(SimConfig(cmd_port=0)).start()
    with open_session(loopback_endpoint(drone)) as session:
        session.send_command(CommandFrame.takeoff())
    final = drone.stop()
    assert final.phase is Phase.FLYING  # no silent auto-land


def test_streaming_publishes_decodable_frames():
    drone = DroneSim(SimConfig(cmd_port=0, fps=30.0, scene=SimScene(Uniform(90), (32, 24)))).start()
    video = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    video.bind(("127.0.0.1", 0))
    video.settimeout(2.0)
    drone.cfg.video_port = video.getsockname()[1]
    try:
        with open_session(loopback_endpoint(drone)) as session:
            session.send_command(CommandFrame.stream_on())
            record, _ = video.recvfrom(65536)
            img = decode_frame_record(record)
            assert (img.width, img.height) == (32, 24)
            assert set(img.pixels) == {90}
    finally:
        video.close()
        drone.stop()


def test_fault_injection_forces_error(sim):
    sim.inject_fault("forward", 2)
    with open_session(loopback_endpoint(sim)) as session:
        session.send_command(CommandFrame.takeoff())
        assert session.send_command(CommandFrame.forward(50)).is_ok
        with pytest.raises(simmod.link.DroneError):
            session.send_command(CommandFrame.forward(50))
        assert session.send_command(CommandFrame.forward(50)).is_ok
