"""Shared test fixtures: image builders, encoders, and independent oracles."""
from __future__ import annotations

import functools
import math
import struct
import zlib

import numpy as np

from faceoracle.corpus import Chunk
from faceoracle.image_quality import FaceAnnotation, LumaImage


# --- image construction ---

def make_image(width: int, height: int, values) -> LumaImage:
    """LumaImage from a scalar fill, flat iterable, or (h, w) array."""
    arr = np.asarray(values, dtype=np.uint8)
    if arr.ndim == 0:
        arr = np.full(width * height, int(values), dtype=np.uint8)
    return LumaImage(width=width, height=height, luma=arr.reshape(-1))


def full_annotation(img: LumaImage) -> FaceAnnotation:
    return FaceAnnotation(0, 0, img.width, img.height)


def make_ppm(width: int, height: int, rgb) -> bytes:
    """Binary PPM (P6) bytes from an (h, w, 3) array or a scalar gray fill."""
    arr = np.asarray(rgb, dtype=np.uint8)
    if arr.ndim == 0:
        arr = np.full((height, width, 3), int(rgb), dtype=np.uint8)
    return b"P6\n%d %d\n255\n" % (width, height) + arr.tobytes()


def make_gray_ppm(width: int, height: int, luma) -> bytes:
    arr = np.asarray(luma, dtype=np.uint8).reshape(height, width)
    return make_ppm(width, height, np.stack([arr, arr, arr], axis=-1))


def _png_chunk(ctype: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + ctype
        + body
        + struct.pack(">I", zlib.crc32(ctype + body) & 0xFFFFFFFF)
    )


def make_png(
    width: int,
    height: int,
    pixels,
    gray: bool = False,
    filters: list[int] | None = None,
) -> bytes:
    """Encode a PNG with explicit per-row filter types (default: all 0).

    pixels: (h, w) for gray or (h, w, 3) for RGB, uint8. Filtered bytes are
    produced by inverting the decoder's reconstruction rules.
    """
    arr = np.asarray(pixels, dtype=np.uint8)
    channels = 1 if gray else 3
    stride = width * channels
    rows = arr.reshape(height, stride).astype(np.int32)
    filters = filters or [0] * height
    bpp = channels

    def paeth(a, b, c):
        p = a + b - c
        pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
        if pa <= pb and pa <= pc:
            return a
        if pb <= pc:
            return b
        return c

    raw = bytearray()
    prev = np.zeros(stride, dtype=np.int32)
    for y in range(height):
        ft = filters[y]
        recon = rows[y]
        raw.append(ft)
        for x in range(stride):
            left = int(recon[x - bpp]) if x >= bpp else 0
            up = int(prev[x])
            up_left = int(prev[x - bpp]) if x >= bpp else 0
            if ft == 0:
                filt = recon[x]
            elif ft == 1:
                filt = recon[x] - left
            elif ft == 2:
                filt = recon[x] - up
            elif ft == 3:
                filt = recon[x] - ((left + up) >> 1)
            elif ft == 4:
                filt = recon[x] - paeth(left, up, up_left)
            else:
                raise ValueError(ft)
            raw.append(int(filt) & 255)
        prev = recon

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 0 if gray else 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(bytes(raw)))
        + _png_chunk(b"IEND", b"")
    )


# --- independent oracles ---

def fnv_oracle(data: bytes) -> int:
    """Reference FNV-1a 64, expressed as a reduce rather than a loop."""
    return functools.reduce(
        lambda h, b: ((h ^ b) * 0x100000001B3) % (1 << 64),
        data,
        0xCBF29CE484222325,
    )


def embed_oracle(text: str) -> np.ndarray:
    """Reference embedding built from fnv_oracle, independent of the package."""
    tokens: list[str] = []
    run: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            run.append(ch)
        elif run:
            tokens.append("".join(run))
            run = []
    if run:
        tokens.append("".join(run))
    vec = [0.0] * 256
    for token in tokens:
        digest = fnv_oracle(token.encode("utf-8"))
        vec[digest % 256] += 1.0 if (digest >> 63) & 1 == 0 else -1.0
    norm = math.sqrt(math.fsum(v * v for v in vec))
    if norm == 0.0:
        return np.asarray(vec)
    return np.asarray([v / norm for v in vec])


def cosine_oracle(a, b) -> float:
    dot = math.fsum(float(x) * float(y) for x, y in zip(a, b))
    norm_a = math.sqrt(math.fsum(float(x) * float(x) for x in a))
    norm_b = math.sqrt(math.fsum(float(y) * float(y) for y in b))
    return min(2.0, max(0.0, 1.0 - dot / (norm_a * norm_b)))


def brute_force_search(entries, query, k):
    """Linear-scan retrieval oracle: (chunk, similarity) sorted like search()."""
    q = np.asarray(query, dtype=np.float64)
    q_norm = float(np.linalg.norm(q))
    scored = []
    for chunk, vec in entries:
        v = np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            continue
        sim = float((v * q).sum()) / (norm * q_norm)
        sim = min(1.0, max(-1.0, sim))
        scored.append((chunk, sim))
    scored.sort(key=lambda item: (-item[1], item[0].chunk_id))
    return scored[:k]


def laplacian_variance_oracle(region: list[list[int]]) -> float:
    """Per-pixel 4-neighbor Laplacian variance, straight from the formula."""
    height = len(region)
    width = len(region[0])
    values = []
    for y in range(1, height - 1):
        for x in range(1, width - 1):
            lap = (
                4 * region[y][x]
                - region[y][x - 1]
                - region[y][x + 1]
                - region[y - 1][x]
                - region[y + 1][x]
            )
            values.append(lap)
    n = len(values)
    mean = math.fsum(values) / n
    return math.fsum((v - mean) ** 2 for v in values) / n


def make_chunk(chunk_id: str, text: str = "", doc_id: str | None = None) -> Chunk:
    doc = doc_id or (chunk_id.rsplit("#", 1)[0] if "#" in chunk_id else "doc.txt")
    return Chunk(
        chunk_id=chunk_id,
        doc_id=doc,
        text=text or f"text of {chunk_id}",
        char_start=0,
        char_end=max(1, len(text)),
        page=1,
        paragraph=1,
    )


def paragraph_oracle(text: str, pos: int) -> int:
    """Independent scan for the paragraph rule: 1 + completed separators.

    A separator is a maximal newline run with >= 2 newlines (blank lines may
    carry spaces/tabs) and completes at its final newline.
    """
    count = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] == "\n":
            j = i + 1
            newlines = 1
            last_newline = i
            while j < n and text[j] in " \t\r\n":
                if text[j] == "\n":
                    newlines += 1
                    last_newline = j
                j += 1
            if newlines >= 2 and last_newline + 1 <= pos:
                count += 1
            i = last_newline + 1
        else:
            i += 1
    return count + 1
