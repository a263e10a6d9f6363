"""Block codecs for column chunks, plus streaming decoders.

Three codecs cover the uncompressed / fast-LZ / entropy-coded corners of
the speed-vs-size tradeoff:

* ``NONE``     identity,
* ``FASTLZ``   a greedy LZ77 with 4-bit token nibbles and 16-bit match
               offsets (min match 4), jit-compiled; framed into independent
               256 KiB sub-blocks so readers can decode incrementally,
* ``DEFLATE``  raw RFC 1951 streams via zlib.

``compress``/``decompress`` are the whole-buffer pair. ``segments`` exposes
the same data as an iterator of decoded spans, which is what the scanner's
chunk readers consume to keep one batch, not one chunk, in memory.
"""

from __future__ import annotations

import enum
import struct
import zlib
from typing import Iterator

import numpy as np
from numba import njit


class CodecError(Exception):
    pass


class Codec(enum.Enum):
    NONE = "none"
    DEFLATE = "deflate"
    FASTLZ = "fastlz"


_FRAME_RAW = 1 << 18
_FRAME_HEADER = struct.Struct("<IIB")  # raw_len, payload_len, kind (0=stored, 1=lz)
_HASH_BITS = 14
_MIN_MATCH = 4
_MAX_OFFSET = 65535
_DEFLATE_PULL = 1 << 20


@njit(cache=True)
def _lz_block_compress(src, dst):  # pragma: no cover - exercised via compress()
    n = src.shape[0]
    table = np.full(1 << _HASH_BITS, -1, np.int64)
    o = 0
    lit = 0
    pos = 0
    while pos <= n - _MIN_MATCH:
        # Hash the next 4 bytes. Arithmetic stays in uint64 with an explicit
        # 32-bit mask: jit integer ops promote, they do not wrap at 32 bits.
        v = (
            np.uint64(src[pos])
            | (np.uint64(src[pos + 1]) << np.uint64(8))
            | (np.uint64(src[pos + 2]) << np.uint64(16))
            | (np.uint64(src[pos + 3]) << np.uint64(24))
        )
        h = np.int64(((v * np.uint64(2654435761)) & np.uint64(0xFFFFFFFF)) >> np.uint64(32 - _HASH_BITS))
        cand = table[h]
        table[h] = pos
        if (
            cand >= 0
            and pos - cand <= _MAX_OFFSET
            and src[cand] == src[pos]
            and src[cand + 1] == src[pos + 1]
            and src[cand + 2] == src[pos + 2]
            and src[cand + 3] == src[pos + 3]
        ):
            mlen = 4
            while pos + mlen < n and src[cand + mlen] == src[pos + mlen]:
                mlen += 1
            llen = pos - lit
            tok_l = 15 if llen >= 15 else llen
            tok_m = 15 if mlen - 4 >= 15 else mlen - 4
            dst[o] = (tok_l << 4) | tok_m
            o += 1
            if llen >= 15:
                rem = llen - 15
                while rem >= 255:
                    dst[o] = 255
                    o += 1
                    rem -= 255
                dst[o] = rem
                o += 1
            for k in range(llen):
                dst[o + k] = src[lit + k]
            o += llen
            off = pos - cand
            dst[o] = off & 0xFF
            dst[o + 1] = off >> 8
            o += 2
            if mlen - 4 >= 15:
                rem = mlen - 4 - 15
                while rem >= 255:
                    dst[o] = 255
                    o += 1
                    rem -= 255
                dst[o] = rem
                o += 1
            pos += mlen
            lit = pos
        else:
            pos += 1
    llen = n - lit
    tok_l = 15 if llen >= 15 else llen
    dst[o] = tok_l << 4
    o += 1
    if llen >= 15:
        rem = llen - 15
        while rem >= 255:
            dst[o] = 255
            o += 1
            rem -= 255
        dst[o] = rem
        o += 1
    for k in range(llen):
        dst[o + k] = src[lit + k]
    o += llen
    return o


@njit(cache=True)
def _lz_block_decompress(src, dst):  # pragma: no cover - exercised via decompress()
    n = src.shape[0]
    dn = dst.shape[0]
    i = 0
    o = 0
    while True:
        if i >= n:
            # Stream may legally end right after a match sequence.
            return o if o == dn else -1
        token = src[i]
        i += 1
        llen = token >> 4
        mlen = token & 0xF
        if llen == 15:
            while True:
                if i >= n:
                    return -2
                b = src[i]
                i += 1
                llen += b
                if b != 255:
                    break
        if o + llen > dn or i + llen > n:
            return -3
        if llen < 24:
            for k in range(llen):
                dst[o + k] = src[i + k]
        else:
            dst[o : o + llen] = src[i : i + llen]
        o += llen
        i += llen
        if o == dn:
            return o if i == n else -4
        if i + 2 > n:
            return -5
        off = np.int64(src[i]) | (np.int64(src[i + 1]) << np.int64(8))
        i += 2
        if off == 0 or off > o:
            return -6
        if mlen == 15:
            while True:
                if i >= n:
                    return -7
                b = src[i]
                i += 1
                mlen += b
                if b != 255:
                    break
        mlen += 4
        if o + mlen > dn:
            return -8
        m = o - off
        if mlen < 24:
            for k in range(mlen):
                dst[o + k] = dst[m + k]
        elif off >= mlen:
            # Non-overlapping: one span copy.
            dst[o : o + mlen] = dst[m : m + mlen]
        else:
            # Overlapping match repeats with period `off`; the bytes in
            # [m, o+done) are final, so each pass can copy that whole
            # prefix again, doubling the copied span.
            done = 0
            while done < mlen:
                take = min(mlen - done, off + done)
                dst[o + done : o + done + take] = dst[m : m + take]
                done += take
        o += mlen


def _as_uint8(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return data.view(np.uint8) if data.dtype != np.uint8 else data
    return np.frombuffer(data, np.uint8)


def _fastlz_compress(src: np.ndarray) -> bytes:
    out = bytearray()
    for start in range(0, src.size, _FRAME_RAW):
        frame = src[start : start + _FRAME_RAW]
        dst = np.empty(frame.size + frame.size // 255 + 16, np.uint8)
        clen = int(_lz_block_compress(frame, dst))
        if clen < frame.size:
            out += _FRAME_HEADER.pack(frame.size, clen, 1)
            out += dst[:clen].tobytes()
        else:
            out += _FRAME_HEADER.pack(frame.size, frame.size, 0)
            out += frame.tobytes()
    return bytes(out)


def _fastlz_segments(src: np.ndarray) -> Iterator[np.ndarray]:
    pos = 0
    total = src.size
    while pos < total:
        if pos + _FRAME_HEADER.size > total:
            raise CodecError(f"truncated frame header at offset {pos}")
        raw_len, clen, kind = _FRAME_HEADER.unpack_from(src.data, pos)
        pos += _FRAME_HEADER.size
        if pos + clen > total:
            raise CodecError(f"truncated frame payload at offset {pos}")
        payload = src[pos : pos + clen]
        pos += clen
        if kind == 0:
            if clen != raw_len:
                raise CodecError("stored frame length mismatch")
            yield payload
        elif kind == 1:
            out = np.empty(raw_len, np.uint8)
            got = int(_lz_block_decompress(payload, out))
            if got != raw_len:
                raise CodecError(f"corrupt frame (code {got})")
            yield out
        else:
            raise CodecError(f"unknown frame kind {kind}")


def _deflate_segments(src: np.ndarray) -> Iterator[np.ndarray]:
    obj = zlib.decompressobj(wbits=-15)
    data = src.tobytes()
    try:
        out = obj.decompress(data, _DEFLATE_PULL)
    except zlib.error as e:
        raise CodecError(f"corrupt deflate stream: {e}") from e
    if out:
        yield np.frombuffer(out, np.uint8)
    while not obj.eof:
        tail = obj.unconsumed_tail
        if not tail:
            if obj.flush():
                raise CodecError("deflate stream has pending output after input end")
            break
        try:
            out = obj.decompress(tail, _DEFLATE_PULL)
        except zlib.error as e:
            raise CodecError(f"corrupt deflate stream: {e}") from e
        if out:
            yield np.frombuffer(out, np.uint8)
    if obj.eof and obj.unused_data:
        raise CodecError("trailing bytes after deflate stream")


def segments(codec: Codec, data) -> Iterator[np.ndarray]:
    """Decoded spans of a compressed chunk, in order, smallest-copy first."""
    src = _as_uint8(data)
    if codec is Codec.NONE:
        return iter((src,)) if src.size else iter(())
    if codec is Codec.FASTLZ:
        return _fastlz_segments(src)
    if codec is Codec.DEFLATE:
        return _deflate_segments(src)
    raise CodecError(f"unknown codec {codec!r}")


class SegmentReader:
    """Sequential ``pull(n)`` interface over decoded segments.

    Pulls that land inside one segment return views; pulls spanning segment
    boundaries concatenate. At most one decoded segment is held at a time.
    """

    def __init__(self, codec: Codec, data, expected_len: int) -> None:
        self._segments = segments(codec, data)
        self._current: np.ndarray | None = None
        self._pos = 0
        self._remaining = expected_len

    def pull(self, n: int) -> np.ndarray:
        if n > self._remaining:
            raise CodecError("pull beyond declared uncompressed length")
        parts: list[np.ndarray] = []
        need = n
        while need:
            if self._current is None or self._pos == self._current.size:
                try:
                    self._current = next(self._segments)
                except StopIteration:
                    raise CodecError("decoded stream shorter than declared length") from None
                self._pos = 0
                continue
            take = min(need, self._current.size - self._pos)
            parts.append(self._current[self._pos : self._pos + take])
            self._pos += take
            need -= take
        self._remaining -= n
        if len(parts) == 1:
            return parts[0]
        if not parts:
            return np.empty(0, np.uint8)
        return np.concatenate(parts)

    def finish(self) -> None:
        """Verify the stream ends exactly where the metadata said it would."""
        if self._remaining:
            raise CodecError(f"{self._remaining} undecoded bytes left in chunk")
        if self._current is not None and self._pos != self._current.size:
            raise CodecError("decoded stream longer than declared length")
        try:
            extra = next(self._segments)
        except StopIteration:
            return
        if extra.size:
            raise CodecError("decoded stream longer than declared length")


def compress(codec: Codec, data) -> bytes:
    src = _as_uint8(data)
    if codec is Codec.NONE:
        return src.tobytes()
    if codec is Codec.DEFLATE:
        obj = zlib.compressobj(level=6, wbits=-15)
        return obj.compress(src.tobytes()) + obj.flush()
    if codec is Codec.FASTLZ:
        return _fastlz_compress(src)
    raise CodecError(f"unknown codec {codec!r}")


def decompress(codec: Codec, data, expected_len: int) -> bytes:
    src = _as_uint8(data)
    if codec is Codec.NONE:
        if src.size != expected_len:
            raise CodecError(f"expected {expected_len} bytes, got {src.size}")
        return src.tobytes()
    out = bytearray()
    for seg in segments(codec, src):
        out += seg.tobytes()
        if len(out) > expected_len:
            raise CodecError(f"expected {expected_len} bytes, got more")
    if len(out) != expected_len:
        raise CodecError(f"expected {expected_len} bytes, got {len(out)}")
    return bytes(out)
