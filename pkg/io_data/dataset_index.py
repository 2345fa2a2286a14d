from typing import List, Optional, Dict, Any, Iterable, Tuple
import json
import os
from errors import PreconditionError, DomainError, ConfigError
from loggable import Loggable
from oct_types import Split, VENDOR_NAMES
from io_data.volume import Volume, LabelMask
from io_data.metaimage import read_metaimage


class IndexEntry:
    """
    One (volume, optional mask) pair of a dataset index.
    """

    def __init__(self, volume: str, vendor: str, split: Split, mask: Optional[str] = None):
        if vendor not in VENDOR_NAMES:
            raise DomainError('Unknown vendor "{0:s}".'.format(vendor))
        self.__volume: str = volume
        self.__mask: Optional[str] = mask
        self.__vendor: str = vendor
        self.__split: Split = split

    @property
    def volume(self) -> str:
        return self.__volume

    @property
    def mask(self) -> Optional[str]:
        return self.__mask

    @property
    def vendor(self) -> str:
        return self.__vendor

    @property
    def split(self) -> Split:
        return self.__split

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {'volume': self.__volume, 'vendor': self.__vendor, 'split': self.__split.value}
        if self.__mask is not None:
            d['mask'] = self.__mask
        return d

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "IndexEntry":
        try:
            return IndexEntry(d['volume'], d['vendor'], Split(d['split']), d.get('mask'))
        except KeyError as e:
            raise ConfigError("Index entry {0} lacks the key {1}.".format(d, e))
        except ValueError:
            raise ConfigError('Index entry {0} has an unknown split "{1}".'.format(d, d.get('split')))


class DatasetIndex(Loggable):
    """
    The list of volumes of a dataset, with their vendor and their split.

    Paths are stored as given. When the index is loaded from a file, relative paths are resolved
    against the directory of the index file.
    """

    def __init__(self, entries: Iterable[IndexEntry], root: str = ""):
        self.__entries: Tuple[IndexEntry, ...] = tuple(entries)
        self.__root: str = root
        seen: Dict[str, None] = {}
        for entry in self.__entries:
            for path in (entry.volume, entry.mask):
                if path is None:
                    continue
                if path in seen:
                    raise PreconditionError('Path "{0:s}" appears twice in the index.'.format(path))
                seen[path] = None
            if entry.split == Split.TRAIN and entry.mask is None:
                raise PreconditionError('Training volume "{0:s}" has no mask.'.format(entry.volume))

    @property
    def entries(self) -> Tuple[IndexEntry, ...]:
        return self.__entries

    @property
    def root(self) -> str:
        return self.__root

    def __len__(self) -> int:
        return len(self.__entries)

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.__root, path)

    def select(self, split: Optional[Split] = None, vendors: Optional[Iterable[str]] = None) -> "DatasetIndex":
        """
        Return the sub-index of the entries that match a split and a set of vendors.
        :param split: the split to keep (None: all splits).
        :param vendors: the vendors to keep (None: all vendors).
        :return: the sub-index, entries in index order.
        """
        keep = None if vendors is None else set(vendors)
        return DatasetIndex([e for e in self.__entries
                             if (split is None or e.split == split) and (keep is None or e.vendor in keep)],
                            self.__root)

    def train_entries(self) -> List[IndexEntry]:
        return [e for e in self.__entries if e.split == Split.TRAIN]

    def vendors(self) -> List[str]:
        return sorted({e.vendor for e in self.__entries})

    def load_volume(self, entry: IndexEntry) -> Volume:
        volume = read_metaimage(self.resolve(entry.volume), as_mask=False)
        meta = volume.meta
        meta.setdefault('vendor', entry.vendor)
        meta.setdefault('split', entry.split.value)
        return Volume(volume.array, volume.spacing, volume.origin, meta)

    def load_mask(self, entry: IndexEntry) -> Optional[LabelMask]:
        if entry.mask is None:
            return None
        return read_metaimage(self.resolve(entry.mask), as_mask=True)

    def load_pair(self, entry: IndexEntry) -> Tuple[Volume, Optional[LabelMask]]:
        volume = self.load_volume(entry)
        mask = self.load_mask(entry)
        if mask is not None:
            mask.check_pairs_with(volume)
        return volume, mask

    def to_dict(self) -> Dict[str, Any]:
        return {'log-type': 'dataset_index', 'entries': [e.to_dict() for e in self.__entries]}

    def save(self, path: str) -> None:
        """
        Persist the index as a JSON list of {volume, mask?, vendor, split}.
        :param path: the path to the JSON file.
        """
        with open(path, "w") as fd:
            json.dump([e.to_dict() for e in self.__entries], fd, indent=2)
            fd.write("\n")

    @staticmethod
    def load(path: str) -> "DatasetIndex":
        """
        Load an index from a JSON file.
        :param path: the path to the JSON file.
        :return: the index.
        :raise ConfigError: if the file is not a list of entries.
        """
        with open(path, "r") as fd:
            try:
                data = json.load(fd)
            except json.JSONDecodeError as e:
                raise ConfigError('Index "{0:s}" is not valid JSON: {1}'.format(path, e))
        if not isinstance(data, list):
            raise ConfigError('Index "{0:s}" must hold a JSON list.'.format(path))
        return DatasetIndex([IndexEntry.from_dict(d) for d in data], os.path.dirname(os.path.abspath(path)))
