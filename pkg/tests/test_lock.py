from lock import BaseLock, ExtLock, ExtRLock


def test_trace_lines_and_counts(tmp_path):
    path = tmp_path / "locks.txt"
    ExtLock.init(str(path))
    lock = ExtRLock("cache")
    with lock.set("a.b.outer"):
        with lock.set("a.b.inner"):
            pass
    assert BaseLock.acquisitions() == {("cache", "a.b.outer"): 1, ("cache", "a.b.inner"): 1}
    ExtLock.init(str(tmp_path / "other.txt"), enabled=False)
    lines = path.read_text().splitlines()
    assert [line.split(" ", 1)[1] for line in lines] == ["a.b.outer acquires cache", "a.b.inner acquires cache",
                                                        "a.b.inner releases cache", "a.b.inner releases cache"]
    assert BaseLock.acquisitions() == {}


def test_disabled_trace_still_counts():
    ExtLock.init("unused", enabled=False)
    lock = ExtLock()
    for _ in range(3):
        with lock.set("worker"):
            pass
    assert BaseLock.acquisitions() == {("unnamed", "worker"): 3}
    assert lock.resource == "unnamed"
    assert lock.locker == "worker"
