"""Column chunk codecs: round trips, framing, streaming reads."""

import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arrowgate import Codec, CodecError, compress, decompress
from arrowgate.codecs import _FRAME_HEADER, SegmentReader, segments

ADVERSARIAL = [
    b"",
    b"\x00",
    b"a",
    b"ab" * 5000,
    b"\x00" * 300_000,
    bytes(range(256)) * 41,
    np.random.default_rng(11).integers(0, 256, 70_000, np.uint8).tobytes(),
    np.random.default_rng(12).integers(0, 4, 300_011, np.uint8).tobytes(),
]


@pytest.mark.parametrize("codec", list(Codec))
@pytest.mark.parametrize("payload", ADVERSARIAL, ids=range(len(ADVERSARIAL)))
def test_roundtrip_adversarial(codec, payload):
    blob = compress(codec, np.frombuffer(payload, np.uint8))
    assert decompress(codec, np.frombuffer(blob, np.uint8), len(payload)) == payload


@pytest.mark.parametrize("codec", list(Codec))
@given(data=st.binary(max_size=4096))
@settings(max_examples=40, deadline=None)
def test_roundtrip_random(codec, data):
    blob = compress(codec, np.frombuffer(data, np.uint8))
    assert decompress(codec, np.frombuffer(blob, np.uint8), len(data)) == data


def test_repetitive_data_actually_compresses():
    payload = (b"0123456789abcdef" * 8192)[:100_000]
    for codec in (Codec.FASTLZ, Codec.DEFLATE):
        blob = compress(codec, np.frombuffer(payload, np.uint8))
        assert len(blob) < len(payload) * 0.2, codec


def test_deflate_is_raw_rfc1951():
    payload = b"hello hello hello, a raw stream with no zlib wrapper" * 20
    blob = compress(Codec.DEFLATE, np.frombuffer(payload, np.uint8))
    assert zlib.decompress(blob, wbits=-15) == payload
    foreign = zlib.compressobj(level=9, wbits=-15)
    foreign_blob = foreign.compress(payload) + foreign.flush()
    out = decompress(Codec.DEFLATE, np.frombuffer(foreign_blob, np.uint8), len(payload))
    assert out == payload


def test_fastlz_frame_layout():
    payload = b"ab" * 1000
    blob = compress(Codec.FASTLZ, np.frombuffer(payload, np.uint8))
    raw_len, payload_len, kind = _FRAME_HEADER.unpack_from(blob, 0)
    assert raw_len == len(payload)
    assert kind in (0, 1)
    assert _FRAME_HEADER.size + payload_len == len(blob)
    assert kind == 1 and payload_len < len(payload)


def test_fastlz_incompressible_frames_are_stored():
    payload = np.random.default_rng(3).integers(0, 256, 50_000, np.uint8).tobytes()
    blob = compress(Codec.FASTLZ, np.frombuffer(payload, np.uint8))
    raw_len, payload_len, kind = _FRAME_HEADER.unpack_from(blob, 0)
    assert kind == 0 and payload_len == raw_len == len(payload)
    assert len(blob) == _FRAME_HEADER.size + len(payload)


def test_fastlz_corrupt_frames_rejected():
    payload = b"xy" * 600
    blob = bytearray(compress(Codec.FASTLZ, np.frombuffer(payload, np.uint8)))
    bad_kind = bytearray(blob)
    bad_kind[8] = 7
    with pytest.raises(CodecError):
        decompress(Codec.FASTLZ, np.frombuffer(bytes(bad_kind), np.uint8), len(payload))
    with pytest.raises(CodecError):
        decompress(Codec.FASTLZ, np.frombuffer(bytes(blob[:-3]), np.uint8), len(payload))
    with pytest.raises(CodecError):
        decompress(Codec.FASTLZ, np.frombuffer(bytes(blob[:7]), np.uint8), len(payload))


def test_declared_length_mismatches_rejected():
    payload = b"payload bytes here" * 10
    for codec in list(Codec):
        blob = compress(codec, np.frombuffer(payload, np.uint8))
        arr = np.frombuffer(blob, np.uint8)
        with pytest.raises(CodecError):
            decompress(codec, arr, len(payload) + 1)
        with pytest.raises(CodecError):
            decompress(codec, arr, len(payload) - 1)


@pytest.mark.parametrize("codec", list(Codec))
def test_segment_reader_pull_patterns(codec):
    rng = np.random.default_rng(5)
    payload = rng.integers(0, 3, 700_003, np.uint8).tobytes()
    blob = np.frombuffer(compress(codec, np.frombuffer(payload, np.uint8)), np.uint8)

    reader = SegmentReader(codec, blob, len(payload))
    got = bytearray()
    for n in (0, 1, 65536, 262143, 300000, len(payload) - 627680, 0):
        got += reader.pull(n).tobytes()
    reader.finish()
    assert bytes(got) == payload

    reader = SegmentReader(codec, blob, len(payload))
    with pytest.raises(CodecError):
        reader.pull(len(payload) + 1)

    reader = SegmentReader(codec, blob, len(payload))
    reader.pull(10)
    with pytest.raises(CodecError):
        reader.finish()


def test_segments_bounded_memory_shape():
    # Segment sizes stay at the framing granularity, so a reader holding
    # one segment never holds the whole chunk.
    payload = np.zeros(1_000_000, np.uint8)
    blob = np.frombuffer(compress(Codec.FASTLZ, payload), np.uint8)
    sizes = [s.size for s in segments(Codec.FASTLZ, blob)]
    assert sum(sizes) == payload.size
    assert max(sizes) <= 1 << 18


def test_int64_column_shape_ordering():
    # The codec tradeoff the file format relies on: masked int64 noise is
    # compressible by both codecs, and deflate is slower but smaller.
    rng = np.random.default_rng(9)
    vals = (rng.integers(0, 2**16, 200_000, np.int64)).astype("<i8")
    raw = vals.view(np.uint8)
    fast = compress(Codec.FASTLZ, raw)
    slow = compress(Codec.DEFLATE, raw)
    assert len(slow) < len(fast) < raw.nbytes
