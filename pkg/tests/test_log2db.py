import os
import sqlite3
import sys
import pytest
from logger import Logger

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "tools"))
import log2db  # noqa: E402


@pytest.fixture
def run_log(tmp_path):
    path = str(tmp_path / "run.log")
    Logger.init(path)
    Logger.log("starting", "train")
    for run in range(2):
        for epoch in range(3):
            Logger.log_epoch(epoch, 0.01, 1.0 / (epoch + 1 + run))
    Logger.log_dict({'log-type': 'evaluation', 'volume': "a.mha", 'vendor': "Cirrus",
                     'dice': {'IRF': 0.5, 'SRF': 1.0}, 'avd_mm3': {'IRF': 2.0, 'SRF': 0.0}})
    Logger.close()
    return path


def test_log_is_loaded(run_log):
    con = sqlite3.connect(":memory:")
    assert log2db.load(run_log, con) == {'epoch': 6, 'evaluation': 2, 'record': 1}
    assert con.execute("SELECT COUNT(*) FROM epoch WHERE run = 1").fetchone()[0] == 3
    assert con.execute("SELECT tag, log_type FROM record").fetchall() == [("train", "message")]
    assert con.execute("SELECT class, dice FROM evaluation ORDER BY class").fetchall() == [("IRF", 0.5), ("SRF", 1.0)]


def test_malformed_lines_are_reported(tmp_path):
    path = tmp_path / "bad.log"
    path.write_text('{"log-type": "message", "message": "x"}\n\n')
    with pytest.raises(log2db.LogFormatError) as info:
        log2db.load(str(path), sqlite3.connect(":memory:"))
    assert info.value.number == 2
