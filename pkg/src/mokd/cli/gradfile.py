"""Plain-text gradient files: a count on the first line, then one float per line."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


class GradientFileError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def read_gradient(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GradientFileError(path, 0, f"cannot read file ({exc.strerror or exc})") from exc
    except UnicodeDecodeError as exc:
        raise GradientFileError(path, 0, "not valid UTF-8") from exc
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise GradientFileError(path, 1, "empty file, expected the entry count")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise GradientFileError(path, 1, f"expected an integer count, got {lines[0].strip()!r}") from None
    if n < 1:
        raise GradientFileError(path, 1, f"entry count must be positive, got {n}")
    body = lines[1:]
    if len(body) < n:
        raise GradientFileError(path, len(lines) + 1, f"expected {n} values, found {len(body)}")
    if len(body) > n:
        raise GradientFileError(path, n + 2, f"unexpected extra content after {n} values")
    out = np.empty(n)
    for i, raw in enumerate(body):
        try:
            v = float(raw.strip())
        except ValueError:
            raise GradientFileError(path, i + 2, f"not a number: {raw.strip()!r}") from None
        if not math.isfinite(v):
            raise GradientFileError(path, i + 2, f"non-finite value {raw.strip()!r}")
        out[i] = v
    return out


def write_gradient(path, g) -> None:
    g = np.asarray(g, dtype=np.float64).ravel()
    lines = [str(g.size)] + ["%.17g" % v for v in g]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
