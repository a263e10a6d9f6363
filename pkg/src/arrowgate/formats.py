"""File format detection for dataset discovery."""

from __future__ import annotations

import enum
import os

from .acf import MAGIC as ACF_MAGIC


class FormatKind(enum.Enum):
    ACF = "acf"
    CSV = "csv"


def detect_format(path: str | os.PathLike) -> FormatKind:
    """Classify a file by magic bytes first, extension second.

    A 4-byte ``ACF1`` prefix wins regardless of name; otherwise ``.acf``
    and ``.csv`` extensions decide. Hardlinked scale-out copies keep their
    real extension last (``part-0.h001.acf``), so ``splitext`` still works.
    """
    with open(path, "rb") as f:
        head = f.read(4)
    if head == ACF_MAGIC:
        return FormatKind.ACF
    ext = os.path.splitext(path)[1].lower()
    if ext == ".acf":
        raise ValueError(f"{os.fspath(path)!r} has an .acf extension but no ACF1 magic")
    if ext == ".csv":
        return FormatKind.CSV
    raise ValueError(f"cannot determine the format of {os.fspath(path)!r}")
