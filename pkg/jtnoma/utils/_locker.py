from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import IO, Any, Iterator, Mapping, Sequence

import pandas as pd
import portalocker as pl

EXCLUSIVE_NONE_BLOCKING = pl.LOCK_EX | pl.LOCK_NB


class Locker:
    FailedToAcquireLock = pl.exceptions.LockException

    def __init__(self, lock_path: Path):
        self.lock_path = lock_path
        self.lock_path.parent.mkdir(parents=True, exist_ok=True)
        self.lock_path.touch(exist_ok=True)

    @contextmanager
    def acquire(
        self,
        poll: float = 0.05,
        *,
        timeout: float | None = None,
        fail_when_locked: bool = False,
    ) -> Iterator[IO]:
        with pl.Lock(
            self.lock_path,
            check_interval=poll,
            timeout=timeout,
            flags=EXCLUSIVE_NONE_BLOCKING,
            fail_when_locked=fail_when_locked,
        ) as fh:
            yield fh


class CsvAppender:
    """Appends rows to one CSV file, serialized through a file lock.

    The header is written by whichever writer finds the file empty. Rows missing a
    column are written with an empty cell.
    """

    def __init__(self, path: Path, fieldnames: Sequence[str]):
        self.path = Path(path)
        self.fieldnames = list(fieldnames)
        self.locker = Locker(self.path.with_name(self.path.name + ".lock"))

    def append(self, rows: Sequence[Mapping[str, Any]]) -> None:
        with self.locker.acquire():
            write_header = not self.path.exists() or self.path.stat().st_size == 0
            frame = pd.DataFrame(list(rows), columns=self.fieldnames)
            frame.to_csv(self.path, mode="a", header=write_header, index=False)

    def remove(self) -> None:
        self.path.unlink(missing_ok=True)
        self.locker.lock_path.unlink(missing_ok=True)
