from typing import TextIO, Optional, Dict, Any
import json
from lock import ExtRLock
from loggable import Loggable


class Logger:
    """
    The run log: one JSON object per line, optionally preceded by a "# <tag>" comment line.

    The log is shared by all threads of the process. Until Logger.init() is called, all
    logging calls are silently ignored.
    """

    __lock_fd = ExtRLock("Logger.fd")
    __shared_fd: Optional[TextIO] = None

    @staticmethod
    def init(path: str, append: bool = False) -> None:
        with Logger.__lock_fd.set("logger.Logger.init"):
            if Logger.__shared_fd is not None:
                Logger.__shared_fd.close()
            Logger.__shared_fd = open(path, "a" if append else "w")

    @staticmethod
    def close() -> None:
        with Logger.__lock_fd.set("logger.Logger.close"):
            if Logger.__shared_fd is not None:
                Logger.__shared_fd.close()
            Logger.__shared_fd = None

    @staticmethod
    def is_enabled() -> bool:
        return Logger.__shared_fd is not None

    @staticmethod
    def __write(line: str, tag: Optional[str]) -> None:
        with Logger.__lock_fd.set("logger.Logger.__write"):
            if Logger.__shared_fd is None:
                return
            if tag is None:
                Logger.__shared_fd.write(line + "\n")
            else:
                Logger.__shared_fd.write("# {}\n{}\n".format(tag, line))
            Logger.__shared_fd.flush()

    @staticmethod
    def log(message: str, tag: Optional[str] = None) -> None:
        Logger.__write(json.dumps({'log-type': 'message', 'message': message}), tag)

    @staticmethod
    def log_dict(d: Dict[str, Any], tag: Optional[str] = None) -> None:
        Logger.__write(json.dumps(d, sort_keys=True), tag)

    @staticmethod
    def log_object(obj: Loggable, tag: Optional[str] = None) -> None:
        Logger.__write(json.dumps(obj.to_dict(), sort_keys=True), tag)

    @staticmethod
    def log_epoch(epoch: int, lr: float, loss: float, tag: Optional[str] = None) -> None:
        Logger.log_dict({'log-type': 'epoch', 'epoch': epoch, 'lr': lr, 'loss': loss}, tag)
