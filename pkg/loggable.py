from typing import Dict, Any
from abc import ABC, abstractmethod
from json import dumps


class Loggable(ABC):
    """
    Base class for every object that is written to the run log or serialized to JSON.
    """

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """
        Generate a key/value pairs representation of the object.
        The dictionary must contain the key "log-type".
        :return: a dictionary that represents the object.
        """
        pass

    def to_json(self, indent: int = 2) -> str:
        return dumps(self.to_dict(), indent=indent, sort_keys=True)
