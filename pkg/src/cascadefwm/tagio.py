"""File formats for time tags, gating plans, and scan data.

Binary tag files are flat arrays of little-endian 64-bit words: the low 63
bits hold the tick (125 ps units), the top bit the channel (0 signal,
1 idler).  CSV tag files have a ``tick,channel`` header and one ``S``/``I``
row per event.  Gating sidecars are text files with one ``start_tick
end_tick`` pair per line.  Scan data is plain ``x,y`` or ``x,y,sigma`` CSV.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .correlation import EmptyGatingError, GatingPlan, TimestampStream

__all__ = [
    "TagFileFormatError",
    "read_tags",
    "write_tags",
    "read_tags_binary",
    "write_tags_binary",
    "read_tags_csv",
    "write_tags_csv",
    "read_gating",
    "write_gating",
    "read_xy_csv",
    "write_xy_csv",
]

_TICK_MASK = np.uint64((1 << 63) - 1)
_CHANNEL_SHIFT = np.uint64(63)
_CHANNEL_NAMES = {0: "S", 1: "I"}
_CHANNEL_CODES = {"S": 0, "I": 1}


class TagFileFormatError(ValueError):
    """A tag, gating, or scan file failed to parse; message says where."""


def write_tags_binary(path: os.PathLike | str, stream: TimestampStream) -> None:
    words = stream.ticks.astype(np.uint64) | (
        stream.channels.astype(np.uint64) << _CHANNEL_SHIFT
    )
    words.astype("<u8").tofile(path)


def read_tags_binary(path: os.PathLike | str) -> TimestampStream:
    size = os.path.getsize(path)
    if size % 8:
        raise TagFileFormatError(
            f"{path}: size {size} is not a whole number of 8-byte records"
        )
    words = np.fromfile(path, dtype="<u8")
    ticks = (words & _TICK_MASK).astype(np.int64)
    channels = (words >> _CHANNEL_SHIFT).astype(np.uint8)
    bad = np.nonzero(np.diff(ticks) < 0)[0]
    if bad.size:
        raise TagFileFormatError(
            f"{path}: ticks go backwards at byte offset {8 * (int(bad[0]) + 1)}"
        )
    return TimestampStream(ticks, channels, validate=False)


def write_tags_csv(path: os.PathLike | str, stream: TimestampStream) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("tick,channel\n")
        for t, c in zip(stream.ticks, stream.channels):
            fh.write(f"{int(t)},{_CHANNEL_NAMES[int(c)]}\n")


def read_tags_csv(path: os.PathLike | str) -> TimestampStream:
    ticks: list[int] = []
    channels: list[int] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.lower() == "tick,channel":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: expected 'tick,channel', got {line!r}"
                )
            try:
                tick = int(parts[0])
            except ValueError:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: bad tick {parts[0]!r}"
                ) from None
            code = _CHANNEL_CODES.get(parts[1].strip().upper())
            if code is None or tick < 0:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: bad record {line!r}"
                )
            if ticks and tick < ticks[-1]:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: ticks go backwards"
                )
            ticks.append(tick)
            channels.append(code)
    return TimestampStream(
        np.array(ticks, dtype=np.int64),
        np.array(channels, dtype=np.uint8),
        validate=False,
    )


def read_tags(path: os.PathLike | str) -> TimestampStream:
    """Read a tag file, CSV when the suffix is .csv, binary otherwise."""
    if Path(path).suffix.lower() == ".csv":
        return read_tags_csv(path)
    return read_tags_binary(path)


def write_tags(path: os.PathLike | str, stream: TimestampStream) -> None:
    if Path(path).suffix.lower() == ".csv":
        write_tags_csv(path, stream)
    else:
        write_tags_binary(path, stream)


def write_gating(path: os.PathLike | str, plan: GatingPlan) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# start_tick end_tick\n")
        for start, end in plan.windows:
            fh.write(f"{start} {end}\n")


def read_gating(path: os.PathLike | str) -> GatingPlan:
    windows: list[tuple[int, int]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: expected 'start_tick end_tick'"
                )
            try:
                start, end = int(parts[0]), int(parts[1])
            except ValueError:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: bad tick values {line!r}"
                ) from None
            windows.append((start, end))
    try:
        return GatingPlan(windows=tuple(windows))
    except EmptyGatingError:
        raise
    except ValueError as exc:
        raise TagFileFormatError(f"{path}: {exc}") from exc


def read_xy_csv(path: os.PathLike | str):
    """Read x,y[,sigma] scan data.

    A single non-numeric first line is treated as a header.  Returns
    (x, y, sigma) arrays; sigma is None when absent.
    """
    xs: list[float] = []
    ys: list[float] = []
    sigmas: list[float] = []
    ncols = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if lineno == 1:
                    continue
                raise TagFileFormatError(
                    f"{path}: line {lineno}: non-numeric data {line!r}"
                ) from None
            if len(values) not in (2, 3):
                raise TagFileFormatError(
                    f"{path}: line {lineno}: expected 2 or 3 columns, got {len(values)}"
                )
            if ncols is None:
                ncols = len(values)
            elif len(values) != ncols:
                raise TagFileFormatError(
                    f"{path}: line {lineno}: inconsistent column count"
                )
            xs.append(values[0])
            ys.append(values[1])
            if ncols == 3:
                sigmas.append(values[2])
    if not xs:
        raise TagFileFormatError(f"{path}: no data rows")
    sigma = np.array(sigmas) if sigmas else None
    return np.array(xs), np.array(ys), sigma


def write_xy_csv(path: os.PathLike | str, x, y, sigma=None, header: str = "x,y") -> None:
    # shortest-exact float formatting, so reading the file back returns
    # bit-identical values
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        if sigma is None:
            for a, b in zip(x, y):
                fh.write(f"{float(a)!r},{float(b)!r}\n")
        else:
            for a, b, c in zip(x, y, sigma):
                fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
