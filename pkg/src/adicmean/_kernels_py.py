"""Numpy implementations of the per-digit scans (used when the extension is absent)."""

from __future__ import annotations

import numpy as np


def checkpoint_counts(digits: np.ndarray, radix: int, positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size and (np.any(np.diff(positions) < 0) or positions[0] < 0 or positions[-1] > len(digits)):
        raise ValueError("positions must be non-decreasing and within the digit buffer")
    out = np.zeros((len(positions), radix), dtype=np.int64)
    for d in range(radix):
        running = np.concatenate(([0], np.cumsum(digits == d, dtype=np.int64)))
        out[:, d] = running[positions]
    return out


def parse_ascii(buf: bytes | np.ndarray, radix: int) -> tuple[np.ndarray, int]:
    raw = np.frombuffer(bytes(buf), dtype=np.uint8)
    vals = raw - np.uint8(48)  # bytes below '0' wrap to large values
    bad = np.flatnonzero(vals >= radix)
    if bad.size:
        first = int(bad[0])
        return vals[:first].copy(), first
    return vals.copy(), -1


def pack2(digits: np.ndarray) -> bytes:
    digits = np.asarray(digits, dtype=np.uint8)
    padded = np.zeros(-(-len(digits) // 4) * 4, dtype=np.uint8)
    padded[: len(digits)] = digits & 3
    quads = padded.reshape(-1, 4)
    packed = quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)
    return packed.astype(np.uint8).tobytes()


def unpack2(data: bytes | np.ndarray, count: int) -> np.ndarray:
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    if count > len(raw) * 4:
        raise ValueError("packed payload shorter than digit count")
    spread = np.stack([(raw >> s) & 3 for s in (0, 2, 4, 6)], axis=1).reshape(-1)
    return spread[:count].astype(np.uint8)


def prefix_codes(points: np.ndarray, max_rank: int, radix: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.uint8)
    if max_rank > points.shape[1]:
        raise ValueError("points shorter than max_rank")
    out = np.empty((points.shape[0], max_rank), dtype=np.int64)
    code = np.zeros(points.shape[0], dtype=np.int64)
    for r in range(max_rank):
        code = code * radix + points[:, r]
        out[:, r] = code
    return out
