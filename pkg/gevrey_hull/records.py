'''Row records (one OrderedDict per row) and typed collections of them,
exported through pandas with a fixed column order and 17-digit floats.
'''
import logging
from abc import ABC, abstractmethod
from collections import OrderedDict

import pandas as pd

from .errors import HullError


logger = logging.getLogger(__name__)


FLOAT_FORMAT = '%.17g'


class RecordError(HullError):
    pass


class RecordTypeError(RecordError):
    pass


class Record(OrderedDict, ABC):
    COLUMNS = ()

    def __init__(self, **fields):
        super().__init__()
        for column in self.COLUMNS:
            self[column] = fields.get(column)

    @classmethod
    def from_dict(cls, d):
        return cls(**{column: d.get(column) for column in cls.COLUMNS})

    @abstractmethod
    def needs_attention(self):
        raise NotImplementedError


class Records(ABC):
    def __init__(self, items=()):
        '''Args:
            items: Iterable of records of get_record_type().
        '''
        self.items = []
        for item in items:
            if isinstance(item, self.__class__.get_record_type()):
                self.items.append(item)
            else:
                raise RecordTypeError(
                    'Expected {e}, got {t}'.format(
                        e=self.__class__.get_record_type().__name__,
                        t=type(item).__name__,
                    )
                )

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, index):
        return self.items[index]

    @classmethod
    @abstractmethod
    def get_record_type(cls):
        raise NotImplementedError

    @classmethod
    def from_list_of_dicts(cls, list_of_dicts):
        return cls(items=[cls.get_record_type().from_dict(d) for d in list_of_dicts])

    @classmethod
    def from_dataframe(cls, dataframe):
        dataframe = dataframe.astype(object).where(pd.notnull(dataframe), None)
        return cls.from_list_of_dicts(dataframe.to_dict('records'))

    @classmethod
    def read_csv(cls, path):
        return cls.from_dataframe(pd.read_csv(path, float_precision='round_trip'))

    def to_dataframe(self):
        return pd.DataFrame(
            data=[list(item.values()) for item in self.items],
            columns=list(self.__class__.get_record_type().COLUMNS),
        )

    def to_csv(self, path=None, sep=','):
        '''Writes to `path` if given, otherwise returns the CSV text.'''
        return self.to_dataframe().to_csv(
            path, sep=sep, index=False, float_format=FLOAT_FORMAT
        )

    def get_items_needing_attention(self):
        return type(self)([item for item in self.items if item.needs_attention()])

    @abstractmethod
    def log_summary(self):
        raise NotImplementedError
