"""Writers accept either a filesystem path or an open text stream."""

from __future__ import annotations

import contextlib
from pathlib import Path


@contextlib.contextmanager
def text_output(target):
    if hasattr(target, "write"):
        yield target
        return
    with open(Path(target), "w", newline="") as fh:
        yield fh
