"""Minimal portable anymap (PGM/PPM) reading and writing.

Only the variants the package produces are supported: ASCII graymap (P2),
binary graymap (P5) and binary pixmap (P6), all with maxval <= 255.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pgm(path, img: np.ndarray, ascii: bool = False, comment: str | None = None) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"graymap must be 2-D, got shape {img.shape}")
    data = np.clip(img, 0, 255).astype(np.uint8)
    h, w = data.shape
    header = ("P2" if ascii else "P5") + "\n"
    if comment:
        for line in comment.splitlines():
            header += f"# {line}\n"
    header += f"{w} {h}\n255\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if ascii:
            for row in data:
                f.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))
        else:
            f.write(data.tobytes())


def write_ppm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"pixmap must be HxWx3, got shape {img.shape}")
    data = np.clip(img, 0, 255).astype(np.uint8)
    h, w, _ = data.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def _tokens(raw: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments, with byte offsets."""
    i, n = 0, len(raw)
    while i < n:
        c = raw[i:i + 1]
        if c == b"#":
            while i < n and raw[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not raw[j:j + 1].isspace():
                j += 1
            yield raw[i:j], j
            i = j


def read_pnm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    toks = _tokens(raw)
    try:
        magic, _ = next(toks)
        w = int(next(toks)[0])
        h = int(next(toks)[0])
        maxval_tok, end = next(toks)
        maxval = int(maxval_tok)
    except (StopIteration, ValueError) as exc:
        raise ValueError(f"{path}: malformed PNM header") from exc
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit images are not supported")
    if magic == b"P2":
        vals = [int(t) for t, _ in toks]
        if len(vals) != w * h:
            raise ValueError(f"{path}: expected {w * h} samples, found {len(vals)}")
        return np.array(vals, dtype=np.uint8).reshape(h, w)
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise ValueError(f"{path}: unsupported PNM type {magic!r}")
    body = raw[end + 1:end + 1 + w * h * channels]
    if len(body) != w * h * channels:
        raise ValueError(f"{path}: truncated pixel data")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape(h, w) if channels == 1 else arr.reshape(h, w, 3)
