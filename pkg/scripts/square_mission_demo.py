#!/usr/bin/env python3
"""Fly the square surveillance mission against the embedded simulator.

Spins up a simulated drone in-process, connects over loopback UDP, flies
takeoff -> 4 x (forward, capture, cw 90) -> land, and leaves the four leg
captures as PPM snapshots in the output directory.

    python scripts/square_mission_demo.py --side 100 --out ./mission-out
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fanet_gcs.capture import FrameBuffer, FrameIngestListener, SnapshotStore
from fanet_gcs.link import CommandFrame, LinkEndpoint, open_session
from fanet_gcs.mission import build_square_mission, execute_mission, format_script
from fanet_gcs.sim import Checkerboard, DroneSim, NoiseSpec, SimConfig, SimScene


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--side", type=int, default=100, help="square side in cm")
    parser.add_argument("--settle-ms", type=int, default=200)
    parser.add_argument("--out", type=Path, default=Path("./mission-out"))
    parser.add_argument("--salt-pepper", type=float, default=0.0,
                        help="impulse noise probability on the camera feed")
    args = parser.parse_args()

    noise = NoiseSpec("salt_pepper", p=args.salt_pepper) if args.salt_pepper else NoiseSpec()
    buffer = FrameBuffer()
    listener = FrameIngestListener(buffer).start()
    drone = DroneSim(
        SimConfig(
            cmd_port=0,
            video_port=listener.port,
            fps=15.0,
            scene=SimScene(Checkerboard(cell_px=16), (128, 128)),
            noise=noise,
        )
    ).start()
    store = SnapshotStore(args.out)

    plan = build_square_mission(args.side, settle_ms=args.settle_ms)
    print("mission script:")
    print(format_script(plan))

    session = open_session(LinkEndpoint(
        drone_addr=drone.cmd_addr, local_bind=("127.0.0.1", 0),
        reply_timeout_ms=2000, max_retries=3,
    ))
    session.send_command(CommandFrame.stream_on())
    while buffer.latest() is None:
        time.sleep(0.02)

    report = execute_mission(
        session, plan, frames=buffer.latest,
        sink=lambda f: store.snap(f, mission=plan.name).id,
    )
    session.close()
    final = drone.stop()
    listener.stop()

    print(f"status: {report.status}  captures: {report.frames_captured}")
    for event in report.events:
        print(f"  {event.step:<18} {event.outcome}")
    print(f"final pose: ({final.x}, {final.y}) heading {final.heading} battery {final.battery}%")
    print(f"snapshots in {store.root}")
    return 0 if report.status == "completed" else 1


if __name__ == "__main__":
    sys.exit(main())
