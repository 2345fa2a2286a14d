"""
Named locks.

Every lock knows the resource it guards. Before each acquisition, the caller names itself with
`set()`:

    with self.__lock_running.set("BatchFeeder.stop"):
        ...

When the trace is enabled (`ExtLock.init(path)`), acquisitions and releases are written to the
trace file, one line each:

    <thread ident> <locker> acquires <resource>
"""

from typing import Dict, Optional, Tuple, Union, TextIO
from collections import Counter
from threading import Lock, RLock, get_ident

_Primitive = Union[Lock, RLock]


class _Trace(object):

    def __init__(self):
        self.guard: Lock = Lock()
        self.fd: Optional[TextIO] = None
        self.counts: Counter = Counter()

    def write(self, locker: str, verb: str, resource: str) -> None:
        with self.guard:
            if verb == "acquires":
                self.counts[(resource, locker)] += 1
            if self.fd is not None:
                self.fd.write("{0} {1} {2} {3}\n".format(get_ident(), locker, verb, resource))
                self.fd.flush()


_trace = _Trace()


class BaseLock(object):

    @staticmethod
    def init(path: str, enabled: bool = True) -> None:
        """
        Open (or disable) the lock trace and reset the acquisition counters.

        :param path: the path to the trace file.
        :param enabled: when False, nothing is written.
        """
        with _trace.guard:
            if _trace.fd is not None:
                _trace.fd.close()
            _trace.fd = open(path, "w") if enabled else None
            _trace.counts.clear()

    @staticmethod
    def acquisitions() -> Dict[Tuple[str, str], int]:
        """
        :return: the number of acquisitions per (resource, locker) since the last `init()`.
        """
        with _trace.guard:
            return dict(_trace.counts)

    def __init__(self, in_lock: _Primitive, in_resource: Optional[str] = None):
        self.__lock: _Primitive = in_lock
        self.__resource: str = in_resource if in_resource is not None else "unnamed"
        self.__locker: str = "unknown"

    @property
    def locker(self) -> str:
        return self.__locker

    @property
    def resource(self) -> str:
        return self.__resource

    def set(self, locker: str) -> 'BaseLock':
        """
        Name the entity about to acquire the lock.

        :param locker: "module.Class.method" of the caller.
        :return: the lock, for use in a `with` statement.
        """
        self.__locker = locker
        return self

    def __enter__(self) -> 'BaseLock':
        self.__lock.acquire()
        _trace.write(self.__locker, "acquires", self.__resource)
        return self

    def __exit__(self, type, value, traceback) -> None:
        _trace.write(self.__locker, "releases", self.__resource)
        self.__lock.release()


class ExtLock(BaseLock):

    def __init__(self, in_resource: Optional[str] = None):
        super().__init__(Lock(), in_resource)


class ExtRLock(BaseLock):

    def __init__(self, in_resource: Optional[str] = None):
        super().__init__(RLock(), in_resource)
