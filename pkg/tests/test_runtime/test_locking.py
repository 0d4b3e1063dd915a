from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import pandas as pd
import pytest

from jtnoma.utils._locker import CsvAppender, Locker

COLUMNS = ["value", "seed", "status"]


@pytest.mark.core
def test_header_is_written_once(tmp_path):
    appender = CsvAppender(tmp_path / "rows.csv", COLUMNS)
    appender.append([{"value": 1, "seed": 0, "status": "converged"}])
    appender.append(
        [
            {"value": 2, "seed": 0, "status": "error", "runtime": 1.5},
            {"value": 3, "seed": 1},
        ]
    )
    lines = (tmp_path / "rows.csv").read_text().splitlines()
    assert lines == ["value,seed,status", "1,0,converged", "2,0,error", "3,1,"]


@pytest.mark.core
def test_remove_deletes_rows_and_lock(tmp_path):
    appender = CsvAppender(tmp_path / "rows.csv", COLUMNS)
    appender.append([{"value": 1, "seed": 0, "status": "converged"}])
    assert appender.locker.lock_path.exists()
    appender.remove()
    appender.remove()
    assert list(tmp_path.iterdir()) == []


@pytest.mark.core
def test_lock_is_exclusive(tmp_path):
    holder = Locker(tmp_path / "sweep.lock")
    other = Locker(tmp_path / "sweep.lock")
    with holder.acquire():
        with pytest.raises(Locker.FailedToAcquireLock):
            with other.acquire(fail_when_locked=True):
                pass
    with other.acquire(fail_when_locked=True):
        pass


@pytest.mark.core
def test_concurrent_appends_keep_every_row(tmp_path):
    path = tmp_path / "rows.csv"

    def write(worker: int) -> None:
        appender = CsvAppender(path, COLUMNS)
        for seed in range(25):
            appender.append([{"value": worker, "seed": seed, "status": "converged"}])

    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(write, range(8)))

    rows = pd.read_csv(path)
    assert list(rows.columns) == COLUMNS
    assert len(rows) == 200
    assert set(zip(rows["value"], rows["seed"])) == {(w, s) for w in range(8) for s in range(25)}
