"""Minimal PNG reader for 8-bit grayscale and RGB images.

Supports exactly the subset needed here: bit depth 8, color types 0
(grayscale) and 2 (RGB), no interlacing. Anything else is rejected
rather than approximated, so decoded pixel values are unambiguous.
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CorruptImage, UnsupportedFormat

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def looks_like_png(data: bytes) -> bool:
    return data[:8] == PNG_SIGNATURE


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def read_png(data: bytes) -> tuple[int, int, np.ndarray]:
    """Decode PNG bytes to (width, height, pixels).

    pixels has shape (height, width) for grayscale or (height, width, 3)
    for RGB, dtype uint8.
    """
    if not looks_like_png(data):
        raise UnsupportedFormat("missing PNG signature")

    pos = 8
    header: tuple[int, int, int] | None = None  # (width, height, channels)
    idat = bytearray()
    saw_iend = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise CorruptImage("truncated chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        ctype = data[pos + 4 : pos + 8]
        body_end = pos + 8 + length
        if body_end + 4 > len(data):
            raise CorruptImage("truncated chunk body")
        body = data[pos + 8 : body_end]
        (crc,) = struct.unpack(">I", data[body_end : body_end + 4])
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise CorruptImage(f"CRC mismatch in {ctype!r} chunk")
        if ctype == b"IHDR":
            if header is not None or length != 13:
                raise CorruptImage("bad IHDR chunk")
            width, height, depth, color, comp, filt, interlace = struct.unpack(
                ">IIBBBBB", body
            )
            if width == 0 or height == 0:
                raise CorruptImage("zero image dimension")
            if depth != 8 or color not in (0, 2):
                raise UnsupportedFormat(
                    f"only 8-bit grayscale or RGB PNG supported "
                    f"(bit depth {depth}, color type {color})"
                )
            if interlace == 1:
                raise UnsupportedFormat("interlaced PNG not supported")
            if comp != 0 or filt != 0 or interlace != 0:
                raise CorruptImage("invalid IHDR method fields")
            header = (width, height, 1 if color == 0 else 3)
        elif ctype == b"IDAT":
            if header is None:
                raise CorruptImage("IDAT before IHDR")
            idat += body
        elif ctype == b"IEND":
            saw_iend = True
            break
        pos = body_end + 4

    if header is None:
        raise CorruptImage("missing IHDR chunk")
    if not saw_iend:
        raise CorruptImage("missing IEND chunk")
    if not idat:
        raise CorruptImage("missing IDAT data")

    width, height, channels = header
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise CorruptImage(f"bad IDAT stream: {exc}") from None

    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise CorruptImage("decompressed data does not match dimensions")

    flat = np.frombuffer(raw, dtype=np.uint8)
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int32)
    bpp = channels
    for y in range(height):
        row_start = y * (stride + 1)
        filter_type = int(flat[row_start])
        line = flat[row_start + 1 : row_start + 1 + stride].astype(np.int32)
        if filter_type == 0:
            cur = line
        elif filter_type == 1:  # Sub: running sum within each pixel lane
            cur = line.reshape(width, bpp).cumsum(axis=0).reshape(stride) & 255
        elif filter_type == 2:  # Up
            cur = (line + prev) & 255
        elif filter_type == 3:  # Average
            cur = np.empty(stride, dtype=np.int32)
            for x in range(stride):
                left = cur[x - bpp] if x >= bpp else 0
                cur[x] = (line[x] + ((left + prev[x]) >> 1)) & 255
        elif filter_type == 4:  # Paeth
            cur = np.empty(stride, dtype=np.int32)
            for x in range(stride):
                left = int(cur[x - bpp]) if x >= bpp else 0
                up_left = int(prev[x - bpp]) if x >= bpp else 0
                cur[x] = (line[x] + _paeth(left, int(prev[x]), up_left)) & 255
        else:
            raise CorruptImage(f"invalid scanline filter {filter_type}")
        out[y] = cur
        prev = cur

    if channels == 1:
        return width, height, out
    return width, height, out.reshape(height, width, 3)
