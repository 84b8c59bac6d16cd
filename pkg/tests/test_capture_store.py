import socket
import struct
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanet_gcs.capture import (
    Frame,
    FrameBuffer,
    FrameIngestListener,
    MalformedFrame,
    MalformedPpm,
    SnapshotNotFound,
    SnapshotStore,
    decode_frame_record,
    encode_frame_payload,
    encode_frame_record,
    load_image,
    save_image,
)
from fanet_gcs.imaging import RgbImage

from conftest import random_rgb


def frame_of(img, seq=1):
    return Frame(image=img, seq=seq, timestamp_ms=0)


# -- transport records ---------------------------------------------------------

def test_record_round_trip(rng):
    img = random_rgb(rng, 16, 16)
    record = encode_frame_record(img)
    assert decode_frame_record(record) == img
    assert len(record) == 4 + 8 + 16 * 16 * 3


def test_record_header_layout(rng):
    img = random_rgb(rng, 3, 2)
    payload = encode_frame_payload(img)
    assert payload[:4] == b"SIMF"
    assert struct.unpack(">HH", payload[4:8]) == (3, 2)
    assert payload[8:] == img.pixels


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r[:-1],                      # truncated payload
        lambda r: r[:4] + b"JUNK" + r[8:],     # bad magic
        lambda r: b"\x00\x00\x00\x05" + r[4:], # wrong length prefix
        lambda r: r[:3],                       # shorter than the prefix
    ],
)
def test_decode_rejects_malformed(mutate, rng):
    record = encode_frame_record(random_rgb(rng, 4, 4))
    with pytest.raises(MalformedFrame):
        decode_frame_record(mutate(record))


# -- latest-wins buffer -----------------------------------------------------------

def test_buffer_latest_wins(rng):
    buffer = FrameBuffer()
    assert buffer.latest() is None
    first = buffer.ingest(encode_frame_record(random_rgb(rng, 4, 4)))
    second = buffer.ingest(encode_frame_record(random_rgb(rng, 4, 4)))
    assert second.seq == first.seq + 1
    assert buffer.latest().seq == second.seq
    assert buffer.ingested == 2


def test_buffer_drops_and_counts_malformed(rng):
    buffer = FrameBuffer()
    kept = buffer.ingest(encode_frame_record(random_rgb(rng, 4, 4)))
    with pytest.raises(MalformedFrame):
        buffer.ingest(b"\x00\x00\x00\x02xx")
    assert buffer.latest() == kept
    assert buffer.malformed == 1


def test_listener_receives_over_udp(rng):
    buffer = FrameBuffer()
    listener = FrameIngestListener(buffer).start()
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        img = random_rgb(rng, 8, 8)
        sock.sendto(encode_frame_record(img), ("127.0.0.1", listener.port))
        deadline = time.monotonic() + 2.0
        while buffer.latest() is None and time.monotonic() < deadline:
            time.sleep(0.01)
        sock.close()
        assert buffer.latest() is not None
        assert buffer.latest().image == img
    finally:
        listener.stop()


# -- PPM ---------------------------------------------------------------------------

def test_ppm_one_white_pixel_exact_bytes(tmp_path):
    path = tmp_path / "white.ppm"
    save_image(RgbImage(1, 1, b"\xff\xff\xff"), path)
    assert path.read_bytes() == b"P6\n1 1\n255\n\xff\xff\xff"


def test_ppm_round_trip(tmp_path, rng):
    for i in range(10):
        img = random_rgb(rng, int(rng.integers(1, 24)), int(rng.integers(1, 24)))
        path = tmp_path / f"img{i}.ppm"
        save_image(img, path)
        assert load_image(path) == img


def test_ppm_rejects_16_bit(tmp_path):
    path = tmp_path / "deep.ppm"
    path.write_bytes(b"P6\n1 1\n65535\n\xff\xff\xff\xff\xff\xff")
    with pytest.raises(MalformedPpm):
        load_image(path)


def test_ppm_rejects_truncation_and_garbage(tmp_path):
    path = tmp_path / "short.ppm"
    path.write_bytes(b"P6\n2 2\n255\n\xff")
    with pytest.raises(MalformedPpm):
        load_image(path)
    path.write_bytes(b"P5\n1 1\n255\n\xff")
    with pytest.raises(MalformedPpm):
        load_image(path)


def test_ppm_accepts_comments(tmp_path):
    path = tmp_path / "commented.ppm"
    path.write_bytes(b"P6\n# shot by a drone\n1 1\n255\n\x01\x02\x03")
    assert load_image(path) == RgbImage(1, 1, b"\x01\x02\x03")


# -- snapshot store -----------------------------------------------------------------

def test_snap_persists_exact_bytes(tmp_path, rng):
    store = SnapshotStore(tmp_path)
    img = random_rgb(rng, 8, 8)
    snapshot = store.snap(frame_of(img), mission="square-100")
    assert store.image(snapshot.id) == img
    meta = store.metadata(snapshot.id)
    assert meta["mission"] == "square-100"
    assert meta["lineage"] == []


def test_snap_ids_unique_and_ordered(tmp_path, rng):
    store = SnapshotStore(tmp_path)
    img = random_rgb(rng, 4, 4)
    ids = [store.snap(frame_of(img, seq=i)).id for i in range(1, 6)]
    assert len(set(ids)) == 5
    assert [m["id"] for m in store.list()] == ids
    assert [m["seq"] for m in store.list()] == [1, 2, 3, 4, 5]


def test_store_counter_survives_restart(tmp_path, rng):
    store = SnapshotStore(tmp_path)
    first = store.snap(frame_of(random_rgb(rng, 4, 4)), lineage=({"op": "complement"},))
    reopened = SnapshotStore(tmp_path)
    second = reopened.snap(frame_of(random_rgb(rng, 4, 4)))
    assert second.id > first.id
    listing = reopened.list()
    assert [m["id"] for m in listing] == [first.id, second.id]
    assert listing[0]["lineage"] == [{"op": "complement"}]


def test_unknown_snapshot_raises(tmp_path):
    store = SnapshotStore(tmp_path)
    with pytest.raises(SnapshotNotFound):
        store.metadata("snap-999999")
    with pytest.raises(SnapshotNotFound):
        store.image("snap-999999")


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_ppm_round_trip_property(tmp_path_factory, w, h, seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    img = random_rgb(rng, w, h)
    path = tmp_path_factory.mktemp("ppm") / "img.ppm"
    save_image(img, path)
    assert load_image(path) == img
