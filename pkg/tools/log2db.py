"""
Load a run log into an SQLite database.

    python log2db.py --log=octfluid.log --db=log.db

Tables:

* epoch: one row per training epoch. A run starts at each epoch 0 record.
* evaluation: one row per (volume, class).
* record: every other record, with its JSON text and the tag line that preceded it.
"""

from typing import Dict, Iterator, Optional, Tuple
import sqlite3
import argparse
import os
import sys
import json


SCHEMA = (
    "CREATE TABLE epoch (run INTEGER NOT NULL, epoch INTEGER NOT NULL, lr REAL NOT NULL, loss REAL NOT NULL)",
    "CREATE INDEX epoch_run_index ON epoch (run)",
    "CREATE TABLE evaluation (volume TEXT NOT NULL, vendor TEXT NOT NULL, class TEXT NOT NULL, "
    "dice REAL NOT NULL, avd_mm3 REAL NOT NULL)",
    "CREATE INDEX evaluation_vendor_index ON evaluation (vendor, class)",
    "CREATE TABLE record (tag TEXT, log_type TEXT NOT NULL, data TEXT NOT NULL)",
    "CREATE INDEX record_log_type_index ON record (log_type)",
)


class LogFormatError(Exception):

    def __init__(self, number: int, detail: str):
        super().__init__("line {0:d}: {1}".format(number, detail))
        self.number = number


def read_records(path: str) -> Iterator[Tuple[Optional[str], Dict, str]]:
    """
    Iterate over the records of a run log.

    :param path: the path to the run log.
    :return: (tag, record, JSON text) triples. The tag is None when no "# tag" line precedes the record.
    :raise LogFormatError: on an empty line or a line that is not JSON.
    """
    tag: Optional[str] = None
    with open(path, "r") as fd:
        for number, line in enumerate(fd, start=1):
            line = line.rstrip("\n")
            if len(line) == 0:
                raise LogFormatError(number, "empty line")
            if line.startswith("# "):
                tag = line[2:]
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise LogFormatError(number, str(e))
            yield tag, record, line
            tag = None


def load(path: str, con: sqlite3.Connection) -> Dict[str, int]:
    """
    Create the tables and insert the records of a run log.

    :param path: the path to the run log.
    :param con: an empty database.
    :return: the number of rows inserted per table.
    """
    for statement in SCHEMA:
        con.execute(statement)
    rows = {'epoch': 0, 'evaluation': 0, 'record': 0}
    run = -1
    for tag, record, text in read_records(path):
        kind = record.get('log-type')
        if kind == 'epoch':
            if record['epoch'] == 0 or run < 0:
                run += 1
            con.execute("INSERT INTO epoch VALUES (?, ?, ?, ?)", (run, record['epoch'], record['lr'], record['loss']))
            rows['epoch'] += 1
        elif kind == 'evaluation':
            con.executemany("INSERT INTO evaluation VALUES (?, ?, ?, ?, ?)",
                            [(record['volume'], record['vendor'], name, dice, record['avd_mm3'][name])
                             for name, dice in sorted(record['dice'].items())])
            rows['evaluation'] += len(record['dice'])
        else:
            con.execute("INSERT INTO record VALUES (?, ?, ?)", (tag, kind, text))
            rows['record'] += 1
    con.commit()
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description='Run log to SQLite')
    parser.add_argument('--log', dest='log', type=str, default="octfluid.log", help='the path to the run log')
    parser.add_argument('--db', dest='db', type=str, default="log.db", help='the path to the database')
    args = parser.parse_args()

    if os.path.exists(args.db):
        os.remove(args.db)
    con = sqlite3.connect(args.db)
    try:
        rows = load(args.log, con)
    except (OSError, LogFormatError, sqlite3.Error, KeyError) as e:
        print("ERROR: {0}".format(e), file=sys.stderr)
        return 1
    finally:
        con.close()
    print(", ".join("{0}: {1:d} rows".format(table, n) for table, n in rows.items()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
