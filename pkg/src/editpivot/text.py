'''
text.py
author(s): editpivot developers

Tokenization and detokenization of mixed CJK/Latin dialogue text

Functions
---------
tokenize: split text into a TokenSeq
detokenize: join a TokenSeq back into normalized text
normalize: tokenize then detokenize
classify: token kind of a surface string
concat: join several TokenSeqs

Classes
-------
Token: one surface string and its kind
TokenSeq: immutable sequence of tokens

(c) Copyright editpivot developers 2024
'''
import functools
from dataclasses import dataclass, field
from enum import Enum

import regex

from editpivot.constants import CJK_CLASS, PUNCT_CLASS
from editpivot.generic_classes import DEFAULT_MARKERS, MarkerSet, PivotError

CJK_CHAR_RE = regex.compile(f"[{CJK_CLASS}]")
PUNCT_CHAR_RE = regex.compile(f"[{PUNCT_CLASS}]")
# AUTO mode: one CJK character | one punctuation/symbol | a run of anything else
AUTO_RE = regex.compile(
    f"([{CJK_CLASS}])|([{PUNCT_CLASS}])|([^{CJK_CLASS}{PUNCT_CLASS}]+)"
    )


class TokenKind(Enum):
    CJK_CHAR = "cjk_char"
    WORD = "word"
    PUNCT = "punct"
    MARKER = "marker"


class TokenMode(Enum):
    CHAR = "char"
    WHITESPACE = "whitespace"
    AUTO = "auto"

    @classmethod
    def from_name(cls, name: "str | TokenMode") -> "TokenMode":
        '''Look up a mode by (case-insensitive) name'''
        if isinstance(name, TokenMode):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise PivotError(f"tokenization mode not recognised: {name}")


@dataclass(frozen=True)
class Token:
    '''A single token.

    Attributes
    ----------
    surface : str
        non-empty text without whitespace
    kind : TokenKind
    '''
    surface: str
    kind: TokenKind

    def __post_init__(self):
        if not self.surface or any(char.isspace() for char in self.surface):
            raise PivotError(f"token surface must be non-empty without whitespace: {self.surface!r}")
        if self.kind is TokenKind.CJK_CHAR and len(self.surface) != 1:
            raise PivotError(f"CJK_CHAR tokens are single characters: {self.surface!r}")

    def __str__(self) -> str:
        return self.surface


@dataclass(frozen=True)
class TokenSeq:
    '''Tokenized utterance.

    Equality compares tokens only; the mode records how the tokens were made.
    '''
    tokens: tuple[Token, ...] = ()
    mode: TokenMode = field(default=TokenMode.AUTO, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return TokenSeq(self.tokens[index], self.mode)
        return self.tokens[index]

    def __add__(self, other: "TokenSeq") -> "TokenSeq":
        if not isinstance(other, TokenSeq):
            return NotImplemented
        return TokenSeq(self.tokens + other.tokens, self.mode)

    def __str__(self) -> str:
        return detokenize(self)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(token.surface for token in self.tokens)

    def has_kind(self, kind: TokenKind) -> bool:
        return any(token.kind is kind for token in self.tokens)

    @classmethod
    def from_surfaces(cls, surfaces, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> "TokenSeq":
        '''Build a sequence from surface strings, classifying each one

        Parameters
        ----------
        surfaces : iterable of str
        mode : TokenMode, optional
            by default TokenMode.AUTO
        markers : MarkerSet, optional

        Returns
        -------
        TokenSeq
        '''
        return cls(tuple(Token(surface, classify(surface, mode, markers)) for surface in surfaces), mode)


def classify(surface: str, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> TokenKind:
    '''Kind of a token surface.

    Parameters
    ----------
    surface : str
    mode : TokenMode, optional
        WHITESPACE mode never produces CJK_CHAR tokens, by default TokenMode.AUTO
    markers : MarkerSet, optional

    Returns
    -------
    TokenKind
    '''
    if surface in markers.op_markers():
        return TokenKind.MARKER
    if surface in markers.literals():
        return TokenKind.WORD
    if len(surface) == 1:
        if mode is not TokenMode.WHITESPACE and CJK_CHAR_RE.fullmatch(surface):
            return TokenKind.CJK_CHAR
        if PUNCT_CHAR_RE.fullmatch(surface):
            return TokenKind.PUNCT
    return TokenKind.WORD


@functools.lru_cache(maxsize=None)
def _literal_splitter(markers: MarkerSet):
    # longest literal first so that overlapping literals are matched greedily
    literals = sorted(markers.literals(), key=len, reverse=True)
    return regex.compile("(" + "|".join(regex.escape(literal) for literal in literals) + ")")


def _split_chunk(chunk: str, mode: TokenMode) -> list[str]:
    '''Split a whitespace-free chunk of text into token surfaces'''
    if mode is TokenMode.CHAR:
        return list(chunk)
    if mode is TokenMode.AUTO:
        return [match.group(0) for match in AUTO_RE.finditer(chunk)]
    # WHITESPACE: peel punctuation off both ends, keep the core intact
    start, end = 0, len(chunk)
    while start < end and PUNCT_CHAR_RE.fullmatch(chunk[start]):
        start += 1
    while end > start and PUNCT_CHAR_RE.fullmatch(chunk[end - 1]):
        end -= 1
    core = [chunk[start:end]] if start < end else []
    return list(chunk[:start]) + core + list(chunk[end:])


def tokenize(text: str, mode: "TokenMode | str" = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> TokenSeq:
    '''Split text into tokens.

    CHAR splits every character, WHITESPACE splits on whitespace and
    separates leading/trailing punctuation, AUTO splits CJK characters one
    at a time and everything else on whitespace and punctuation. Marker
    literals are single tokens in every mode.

    Parameters
    ----------
    text : str
    mode : TokenMode | str, optional
        by default TokenMode.AUTO
    markers : MarkerSet, optional
        literals kept atomic

    Returns
    -------
    TokenSeq
        empty for empty input
    '''
    if not isinstance(text, str):
        raise TypeError(f"can only tokenize strings: {type(text)}")
    mode = TokenMode.from_name(mode)
    literals = set(markers.literals())
    surfaces = []
    for segment in _literal_splitter(markers).split(text):
        if segment in literals:
            surfaces.append(segment)
            continue
        for chunk in segment.split():
            surfaces.extend(_split_chunk(chunk, mode))
    return TokenSeq.from_surfaces(surfaces, mode, markers)


def _needs_space(previous: Token, token: Token) -> bool:
    if TokenKind.MARKER in (previous.kind, token.kind):
        return True
    if token.kind is TokenKind.PUNCT:
        return False
    if token.kind is TokenKind.CJK_CHAR and previous.kind in (TokenKind.CJK_CHAR, TokenKind.PUNCT):
        return False
    return True


def detokenize(seq: TokenSeq, mode: "TokenMode | str | None" = None) -> str:
    '''Join tokens into normalized text.

    Words are separated by single spaces, punctuation attaches to the token
    before it, adjacent CJK characters are joined directly and markers are
    always space-separated. The rules depend on token kinds only, so the
    result tokenizes back to seq under the same mode.

    Parameters
    ----------
    seq : TokenSeq
    mode : TokenMode | str, optional
        mode the text will be read back with, by default seq.mode

    Returns
    -------
    str
    '''
    if mode is not None:
        TokenMode.from_name(mode)
    pieces = []
    previous = None
    for token in seq:
        if previous is not None and _needs_space(previous, token):
            pieces.append(" ")
        pieces.append(token.surface)
        previous = token
    return "".join(pieces)


def normalize(text: str, mode: "TokenMode | str" = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> str:
    '''Whitespace-normalized form of text'''
    return detokenize(tokenize(text, mode, markers), mode)


def concat(seqs, mode: TokenMode = TokenMode.AUTO) -> TokenSeq:
    '''Concatenate token sequences'''
    tokens = []
    for seq in seqs:
        tokens.extend(seq.tokens)
    return TokenSeq(tuple(tokens), mode)
