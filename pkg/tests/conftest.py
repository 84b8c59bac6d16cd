import numpy as np
import pytest

from fanet_gcs.imaging import GrayImage, RgbImage
from fanet_gcs.link import LinkEndpoint
from fanet_gcs.sim import DroneSim, SimConfig


def random_rgb(rng: np.random.Generator, width: int, height: int) -> RgbImage:
    return RgbImage(width, height, rng.integers(0, 256, width * height * 3, dtype=np.uint8).tobytes())


def random_gray(rng: np.random.Generator, width: int, height: int) -> GrayImage:
    return GrayImage(width, height, rng.integers(0, 256, width * height, dtype=np.uint8).tobytes())


def loopback_endpoint(sim: DroneSim, timeout_ms: int = 1000, retries: int = 3) -> LinkEndpoint:
    """Endpoint pointing at a running sim, ephemeral local port."""
    return LinkEndpoint(
        drone_addr=sim.cmd_addr,
        local_bind=("127.0.0.1", 0),
        reply_timeout_ms=timeout_ms,
        max_retries=retries,
    )


@pytest.fixture
def sim():
    drone = DroneSim(SimConfig(cmd_port=0, fps=40.0)).start()
    yield drone
    drone.stop()


@pytest.fixture
def rng():
    return np.random.default_rng(20230306)
