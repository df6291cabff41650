"""Persistence of run results: runs.csv and traces.jsonl."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterator

from toc_manager.sim.models import RUN_COLUMNS, RunResult

logger = logging.getLogger(__name__)


@contextlib.contextmanager
def atomic_write(path: str | Path) -> Iterator[io.TextIOBase]:
    """Write to a temporary file next to path and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_csv(path: str | Path, rows: list[dict], fieldnames: list[str]) -> None:
    """Header row first, '\\n' line endings."""
    with atomic_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_runs_csv(results: list[RunResult], path: str | Path) -> None:
    write_csv(path, [r.to_row() for r in results], RUN_COLUMNS)
    logger.info(f"Wrote {len(results)} runs to {path}")


def write_traces_jsonl(results: list[RunResult], path: str | Path) -> None:
    """One JSON object per event, tagged with its run index."""
    count = 0
    with atomic_write(path) as f:
        for result in results:
            for event in result.trace:
                record = {"run": result.run_index, **event.to_dict()}
                f.write(json.dumps(record, sort_keys=True) + "\n")
                count += 1
    logger.info(f"Wrote {count} trace events to {path}")


def read_runs_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
