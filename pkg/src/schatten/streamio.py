"""Stream file format (v1).

Text, UTF-8. Line 1 is the header::

    schatten-stream v1 n=<int> m=<int> mode=<turnstile|entrywise|roworder>

Every following line is either a comment starting with ``#`` or an update
``<row> <col> <value>`` with the value in shortest round-trip decimal.
Row-order files must be sorted by (row, col). The writer emits exactly this
grammar, so write-then-read reproduces the update sequence bit for bit.
"""

from __future__ import annotations

import re
from pathlib import Path

from .core import MatrixStream
from .errors import SchattenError, StreamFormatError

_HEADER_RE = re.compile(
    r"^schatten-stream v1 n=(\d+) m=(\d+) "
    r"mode=(turnstile|entrywise|roworder)$")


def read_stream(path) -> MatrixStream:
    """Parse a v1 stream file; malformed content names the offending line."""
    path = Path(path)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise StreamFormatError(f"{path}: empty file, missing header")
        match = _HEADER_RE.match(header.rstrip("\n"))
        if match is None:
            raise StreamFormatError(
                f"{path}: line 1: malformed header {header.rstrip()!r}")
        n, m, mode = int(match.group(1)), int(match.group(2)), match.group(3)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise StreamFormatError(
                    f"{path}: line {lineno}: expected '<row> <col> <value>', "
                    f"got {line!r}")
            try:
                i = int(parts[0])
                j = int(parts[1])
                v = float(parts[2])
            except ValueError as exc:
                raise StreamFormatError(
                    f"{path}: line {lineno}: {exc}") from None
            rows.append(i)
            cols.append(j)
            vals.append(v)
    try:
        return MatrixStream(n, m, mode, rows, cols, vals)
    except SchattenError as exc:
        raise StreamFormatError(f"{path}: {exc}") from exc


def write_stream(stream, path) -> None:
    """Write a stream in the v1 grammar (shortest round-trip decimals)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(
            f"schatten-stream v1 n={stream.n} m={stream.m} mode={stream.mode}\n")
        for rows, cols, vals in stream.iter_chunks():
            fh.writelines(
                f"{int(i)} {int(j)} {float(v)!r}\n"
                for i, j, v in zip(rows, cols, vals))
