'''
generic_classes.py
author(s): editpivot developers

Lowest level objects

(c) Copyright editpivot developers 2024
'''

import hashlib
from dataclasses import dataclass

import numpy as np

UINT64_LIMIT = 2**64


# raise this when bad things happen
class PivotError(Exception):
    pass


@dataclass(frozen=True)
class MarkerSet:
    '''Literal strings used by the marker grammar and the prompt layout.

    Attributes
    ----------
    insert : str
        marks an insertion, by default "[I]"
    delete : str
        opens a replacement, by default "[D]"
    replace : str
        separates the deleted span from the inserted span, by default "[R]"
    none : str
        sentinel inserted span for a pure deletion, by default "[NONE]"
    cls : str
        prompt start, by default "[CLS]"
    sep : str
        prompt separator, by default "[SEP]"
    '''
    insert: str = "[I]"
    delete: str = "[D]"
    replace: str = "[R]"
    none: str = "[NONE]"
    cls: str = "[CLS]"
    sep: str = "[SEP]"

    def __post_init__(self):
        literals = self.literals()
        for literal in literals:
            if not literal or any(char.isspace() for char in literal):
                raise PivotError(f"marker literals must be non-empty and free of whitespace: {literal!r}")
        if len(set(literals)) != len(literals):
            raise PivotError(f"marker literals must be distinct: {literals}")

    def op_markers(self) -> tuple[str, ...]:
        '''Markers of the edit grammar itself'''
        return (self.insert, self.delete, self.replace)

    def literals(self) -> tuple[str, ...]:
        '''Every literal that must survive tokenization as one token'''
        return (self.insert, self.delete, self.replace, self.none, self.cls, self.sep)


DEFAULT_MARKERS = MarkerSet()


def stream_key(sample_id: str) -> int:
    '''64-bit key of a sample id: first 8 bytes (big-endian) of its blake2b digest

    Parameters
    ----------
    sample_id : str

    Returns
    -------
    int
        key in [0, 2**64)
    '''
    digest = hashlib.blake2b(sample_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def check_seed(seed: int) -> int:
    '''Ensure seed is a 64-bit unsigned integer'''
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise PivotError(f"seed must be an integer: {seed!r}")
    if not 0 <= seed < UINT64_LIMIT:
        raise PivotError(f"seed must be a 64-bit unsigned integer: {seed}")
    return int(seed)


def make_stream(seed: int) -> np.random.Generator:
    '''Random stream for a whole run'''
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(check_seed(seed))))


def sample_stream(seed: int, sample_id: str) -> np.random.Generator:
    '''Random stream owned by one sample.

    Depends only on (seed, sample_id), so results do not change with
    corpus order or with how samples are dispatched.

    Parameters
    ----------
    seed : int
        run seed
    sample_id : str
        id of the sample

    Returns
    -------
    np.random.Generator
        PCG64 stream seeded with SeedSequence([seed, stream_key(sample_id)])
    '''
    entropy = [check_seed(seed), stream_key(sample_id)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
