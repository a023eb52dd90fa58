"""Grayscale image input/output: plain PGM (P2/P5) and headerless CSV."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pgm_tokens(data: bytes, count: int):
    """Split the first ``count`` header tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM with maxval 255, normalised to [0, 1]."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _pgm_tokens(data, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    if magic == b"P5":
        raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    elif magic == b"P2":
        raw = np.array(data[offset:].split()[: w * h], dtype=float)
    else:
        raise ValueError(f"{path}: not a P2/P5 PGM file")
    if raw.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {raw.size}")
    return raw.reshape(h, w).astype(float) / 255.0


def write_pgm(path, pixels, binary: bool = True) -> None:
    p = np.asarray(pixels, dtype=float)
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    q = np.rint(p * 255).astype(np.uint8)
    h, w = q.shape
    if binary:
        Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + q.tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in q)
        Path(path).write_text(f"P2\n{w} {h}\n255\n{body}\n")


def read_csv_image(path) -> np.ndarray:
    p = np.loadtxt(path, delimiter=",", ndmin=2)
    if p.shape[0] != p.shape[1]:
        raise ValueError(f"{path}: expected a square CSV image, got shape {p.shape}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError(f"{path}: pixel values must lie in [0, 1]")
    return p


def read_image(path) -> np.ndarray:
    """Load a grayscale image from ``.pgm`` or ``.csv``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    if path.suffix.lower() == ".csv":
        return read_csv_image(path)
    return read_pgm(path)


def bundled_images() -> list[Path]:
    """Sample 28x28 MNIST digits shipped with the package, in index order."""
    here = Path(__file__).parent / "data"
    return sorted(here.glob("mnist*.pgm"))


def bundled_image(index: int) -> Path:
    path = Path(__file__).parent / "data" / f"mnist{index}.pgm"
    if not path.exists():
        raise FileNotFoundError(f"no bundled image with index {index}")
    return path
