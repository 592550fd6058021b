'''
editscript.py
author(s): editpivot developers

Edit scripts: extraction from utterance pairs, marker-format
serialization and parsing, and application to incomplete utterances

Functions
---------
lcs_align: longest common subsequence as matched index pairs
lcs_length: length of the longest common subsequence
extract: edit script turning one utterance into another
serialize: render a script in the marker format
parse: read a marker-format string back into a script
apply: apply a script to an incomplete utterance
apply_with_report: apply, also counting skipped ops
split_rfis: split a script into replacements and insertions

Classes
-------
EditOp: one insertion or replacement
EditScript: ordered sequence of EditOps
ParseDiagnostic: something the lenient parser skipped

(c) Copyright editpivot developers 2024
'''
import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from editpivot.generic_classes import DEFAULT_MARKERS, MarkerSet, PivotError
from editpivot.text import Token, TokenKind, TokenMode, TokenSeq, detokenize, tokenize

logger = logging.getLogger(__name__)


class OpKind(Enum):
    INSERTION = "insertion"
    REPLACEMENT = "replacement"


class Layout(Enum):
    POSITIONAL = "positional"
    GROUPED = "grouped"


class Strategy(Enum):
    ANCHORED = "anchored"
    MATCHED = "matched"
    RANDOM = "random"


class Policy(Enum):
    STRICT = "strict"
    LENIENT = "lenient"


def enum_from_name(enum_class, name):
    '''Look up an enum member by (case-insensitive) value'''
    if isinstance(name, enum_class):
        return name
    try:
        return enum_class(str(name).lower())
    except ValueError:
        options = ", ".join(member.value for member in enum_class)
        raise PivotError(f"{enum_class.__name__} not recognised: {name} (options: {options})")


@dataclass(frozen=True)
class EditOp:
    '''A single insertion or replacement.

    Attributes
    ----------
    kind : OpKind
    deleted : TokenSeq
        empty for insertions
    inserted : TokenSeq
        never empty
    anchor : int | None
        insertion gap (0..len) or start index of the deleted span
    '''
    kind: OpKind
    deleted: TokenSeq
    inserted: TokenSeq
    anchor: int | None = None

    def __post_init__(self):
        if not self.inserted:
            raise PivotError(f"{self.kind.value} needs inserted tokens")
        if self.kind is OpKind.INSERTION and self.deleted:
            raise PivotError("insertions cannot delete tokens")
        if self.kind is OpKind.REPLACEMENT and not self.deleted:
            raise PivotError("replacements need deleted tokens")
        if self.anchor is not None and self.anchor < 0:
            raise PivotError(f"anchors cannot be negative: {self.anchor}")

    @classmethod
    def insertion(cls, inserted: TokenSeq, anchor: int | None = None) -> "EditOp":
        return cls(OpKind.INSERTION, TokenSeq((), inserted.mode), inserted, anchor)

    @classmethod
    def replacement(cls, deleted: TokenSeq, inserted: TokenSeq, anchor: int | None = None) -> "EditOp":
        return cls(OpKind.REPLACEMENT, deleted, inserted, anchor)

    def without_anchor(self) -> "EditOp":
        return replace(self, anchor=None)

    def key(self) -> tuple:
        '''Anchor-free identity of the op'''
        return (self.kind, self.deleted.surfaces, self.inserted.surfaces)

    def is_deletion(self, markers: MarkerSet = DEFAULT_MARKERS) -> bool:
        '''Whether this replacement stands for a pure deletion'''
        return self.kind is OpKind.REPLACEMENT and self.inserted.surfaces == (markers.none,)

    def __str__(self) -> str:
        return serialize(EditScript((self.without_anchor(),)))


@dataclass(frozen=True)
class EditScript:
    '''Ordered sequence of edit operations.

    Attributes
    ----------
    ops : tuple[EditOp, ...]
    source_len : int | None
        token count of the utterance the anchors refer to
    '''
    ops: tuple[EditOp, ...] = ()
    source_len: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __str__(self) -> str:
        return serialize(self)

    @property
    def insertions(self) -> tuple[EditOp, ...]:
        return tuple(op for op in self.ops if op.kind is OpKind.INSERTION)

    @property
    def replacements(self) -> tuple[EditOp, ...]:
        return tuple(op for op in self.ops if op.kind is OpKind.REPLACEMENT)

    def is_anchored(self) -> bool:
        return self.source_len is not None and all(op.anchor is not None for op in self.ops)

    def without_anchors(self) -> "EditScript":
        return EditScript(tuple(op.without_anchor() for op in self.ops))

    def keys(self) -> tuple:
        '''Anchor-free, order-sensitive identity of the script'''
        return tuple(op.key() for op in self.ops)

    def same_ops(self, other: "EditScript") -> bool:
        '''Equality modulo anchors'''
        return self.keys() == other.keys()

    def check(self):
        '''Check anchor ordering, bounds and replacement overlap'''
        if not any(op.anchor is not None for op in self.ops):
            return
        previous_anchor = 0
        replaced_until = 0
        for op in self.ops:
            if op.anchor is None:
                raise PivotError("anchors must be given for every op or for none")
            if op.anchor < previous_anchor:
                raise PivotError(f"anchors must be non-decreasing: {op.anchor} after {previous_anchor}")
            if self.source_len is not None and op.anchor > self.source_len:
                raise PivotError(f"anchor {op.anchor} beyond source length {self.source_len}")
            if op.kind is OpKind.REPLACEMENT:
                if op.anchor < replaced_until:
                    raise PivotError(f"replacement at {op.anchor} overlaps the previous replacement")
                replaced_until = op.anchor + len(op.deleted)
                if self.source_len is not None and replaced_until > self.source_len:
                    raise PivotError(f"replacement at {op.anchor} runs past the source")
            previous_anchor = op.anchor


@dataclass(frozen=True)
class ParseDiagnostic:
    '''Something the lenient parser skipped or dropped'''
    position: int
    message: str

    def __str__(self) -> str:
        return f"token {self.position}: {self.message}"


def _surfaces(seq) -> list:
    return list(seq.surfaces) if isinstance(seq, TokenSeq) else list(seq)


def lcs_table(a, b) -> np.ndarray:
    '''Dynamic-programming table of prefix LCS lengths

    Parameters
    ----------
    a : TokenSeq | sequence
    b : TokenSeq | sequence

    Returns
    -------
    np.ndarray
        (len(a)+1, len(b)+1) array, entry [i, j] is the LCS length of a[:i], b[:j]
    '''
    a, b = _surfaces(a), _surfaces(b)
    table = np.zeros((len(a) + 1, len(b) + 1), dtype=np.int64)
    for i, a_item in enumerate(a, start=1):
        row, above = table[i], table[i - 1]
        for j, b_item in enumerate(b, start=1):
            if a_item == b_item:
                row[j] = above[j - 1] + 1
            else:
                row[j] = max(above[j], row[j - 1])
    return table


def lcs_length(a, b) -> int:
    '''Length of the longest common subsequence'''
    return int(lcs_table(a, b)[-1, -1])


def lcs_align(a, b) -> list[tuple[int, int]]:
    '''Longest common subsequence of two token sequences.

    Backtrace from the end of the table prefers a match, then a step
    up (skip a token of a), then a step left (skip a token of b).

    Parameters
    ----------
    a : TokenSeq | sequence
    b : TokenSeq | sequence

    Returns
    -------
    list[tuple[int, int]]
        matched (index in a, index in b) pairs, increasing in both
    '''
    a_items, b_items = _surfaces(a), _surfaces(b)
    table = lcs_table(a_items, b_items)
    pairs = []
    i, j = len(a_items), len(b_items)
    while i > 0 and j > 0:
        if a_items[i - 1] == b_items[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i - 1, j] >= table[i, j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def extract(incomplete: TokenSeq, rewritten: TokenSeq, markers: MarkerSet = DEFAULT_MARKERS) -> EditScript:
    '''Edit script turning the incomplete utterance into the rewritten one.

    Deletion and insertion runs that fall in the same gap between
    consecutive LCS anchors merge into one replacement, a gap with only
    inserted tokens gives one insertion, and a gap with only deleted tokens
    gives a replacement whose inserted span is the NONE sentinel.

    Parameters
    ----------
    incomplete : TokenSeq
    rewritten : TokenSeq
    markers : MarkerSet, optional
        supplies the NONE sentinel

    Returns
    -------
    EditScript
        anchored ops in utterance order, source_len = len(incomplete)
    '''
    none_span = TokenSeq((Token(markers.none, TokenKind.WORD),), incomplete.mode)
    ops = []
    previous_i, previous_j = -1, -1
    for i, j in lcs_align(incomplete, rewritten) + [(len(incomplete), len(rewritten))]:
        deleted = incomplete[previous_i + 1:i]
        inserted = rewritten[previous_j + 1:j]
        gap = previous_i + 1
        if deleted and inserted:
            ops.append(EditOp.replacement(deleted, inserted, gap))
        elif inserted:
            ops.append(EditOp.insertion(inserted, gap))
        elif deleted:
            ops.append(EditOp.replacement(deleted, none_span, gap))
        previous_i, previous_j = i, j
    return EditScript(tuple(ops), len(incomplete))


def _op_tokens(op: EditOp, markers: MarkerSet) -> list[Token]:
    for span in (op.deleted, op.inserted):
        if span.has_kind(TokenKind.MARKER):
            raise PivotError(f"edit spans cannot contain markers: {span.surfaces}")
    if op.kind is OpKind.INSERTION:
        return [Token(markers.insert, TokenKind.MARKER), *op.inserted]
    return [
        Token(markers.delete, TokenKind.MARKER), *op.deleted,
        Token(markers.replace, TokenKind.MARKER), *op.inserted
        ]


def serialize(script: EditScript, layout: "Layout | str" = Layout.POSITIONAL, markers: MarkerSet = DEFAULT_MARKERS) -> str:
    '''Render a script in the marker format.

    POSITIONAL keeps script order; GROUPED puts every insertion before every
    replacement. Anchors are not written.

    Parameters
    ----------
    script : EditScript
    layout : Layout | str, optional
        by default Layout.POSITIONAL
    markers : MarkerSet, optional

    Returns
    -------
    str
        "" for the empty script
    '''
    layout = enum_from_name(Layout, layout)
    ops = script.ops
    if layout is Layout.GROUPED:
        ops = script.insertions + script.replacements
    tokens = []
    for op in ops:
        tokens.extend(_op_tokens(op, markers))
    return detokenize(TokenSeq(tuple(tokens)))


class _ScriptReader:
    '''State machine behind parse'''
    def __init__(self, tokens: TokenSeq, strict: bool, markers: MarkerSet):
        self.tokens = tokens
        self.strict = strict
        self.markers = markers
        self.ops = []
        self.diagnostics = []

    def report(self, position: int, message: str):
        if self.strict:
            raise PivotError(f"malformed edit script at token {position}: {message}")
        self.diagnostics.append(ParseDiagnostic(position, message))

    def span_from(self, start: int) -> int:
        '''Index of the next marker at or after start'''
        end = start
        while end < len(self.tokens) and self.tokens[end].kind is not TokenKind.MARKER:
            end += 1
        return end

    def read(self):
        tokens, markers = self.tokens, self.markers
        position = self.span_from(0)
        if position > 0:
            self.report(0, f"text before the first marker skipped: {detokenize(tokens[:position])!r}")
        while position < len(tokens):
            marker = tokens[position].surface
            span_end = self.span_from(position + 1)
            span = tokens[position + 1:span_end]
            if marker == markers.insert:
                if not span or span.surfaces == (markers.none,):
                    self.report(position, "insertion with an empty span dropped")
                else:
                    self.ops.append(EditOp.insertion(span))
                position = span_end
            elif marker == markers.replace:
                self.report(position, "replacement marker without an open deletion dropped")
                position = span_end
            else:
                position = self.read_replacement(position, span, span_end)
        return EditScript(tuple(self.ops)), self.diagnostics

    def read_replacement(self, position: int, deleted: TokenSeq, span_end: int) -> int:
        tokens, markers = self.tokens, self.markers
        if span_end >= len(tokens) or tokens[span_end].surface != markers.replace:
            self.report(position, "deletion not followed by a replacement marker dropped")
            return span_end
        inserted_end = self.span_from(span_end + 1)
        inserted = tokens[span_end + 1:inserted_end]
        if not deleted or not inserted:
            self.report(position, "replacement with an empty span dropped")
        else:
            self.ops.append(EditOp.replacement(deleted, inserted))
        return inserted_end


def parse(marker_string: str, strict: bool = False, mode: "TokenMode | str" = TokenMode.AUTO,
          markers: MarkerSet = DEFAULT_MARKERS) -> tuple[EditScript, list[ParseDiagnostic]]:
    '''Read a marker-format string.

    Grammar: script := op*, op := [I] span | [D] span [R] span, where a span
    is one or more non-marker tokens. In lenient mode, text before the first
    marker, a deletion without a replacement marker, a replacement marker
    without an open deletion and ops with empty spans are dropped, each
    leaving one diagnostic. In strict mode each of these is an error.

    Parameters
    ----------
    marker_string : str
    strict : bool, optional
        by default False
    mode : TokenMode | str, optional
        tokenization of the spans, by default TokenMode.AUTO
    markers : MarkerSet, optional

    Returns
    -------
    tuple[EditScript, list[ParseDiagnostic]]
        unanchored script and the diagnostics
    '''
    reader = _ScriptReader(tokenize(marker_string, mode, markers), strict, markers)
    return reader.read()


@dataclass
class _Cell:
    '''A token of the utterance being edited and the source gap it sits at'''
    token: Token
    gap: int | None


@dataclass
class _Workspace:
    cells: list = field(default_factory=list)
    skipped: int = 0

    def surfaces(self) -> list:
        return [cell.token.surface for cell in self.cells]

    def find(self, span: TokenSeq) -> int | None:
        '''Leftmost exact occurrence of span'''
        surfaces, target = self.surfaces(), list(span.surfaces)
        for start in range(len(surfaces) - len(target) + 1):
            if surfaces[start:start + len(target)] == target:
                return start
        return None

    def gap_position(self, gap: int) -> int:
        '''Current index of a gap of the source utterance'''
        for index, cell in enumerate(self.cells):
            if cell.gap is not None and cell.gap >= gap:
                return index
        return len(self.cells)

    def splice(self, start: int, length: int, tokens, gap):
        self.cells[start:start + length] = [_Cell(token, gap) for token in tokens]


def _fail(policy: Policy, workspace: _Workspace, message: str):
    if policy is Policy.STRICT:
        raise PivotError(message)
    logger.debug(f"skipped op: {message}")
    workspace.skipped += 1


def _replacement_tokens(op: EditOp, markers: MarkerSet) -> tuple:
    return () if op.is_deletion(markers) else op.inserted.tokens


def _apply_anchored_replacements(workspace: _Workspace, script: EditScript, policy: Policy, markers: MarkerSet):
    for op in reversed(script.replacements):
        start = workspace.gap_position(op.anchor)
        found = workspace.surfaces()[start:start + len(op.deleted)]
        if found != list(op.deleted.surfaces) or workspace.cells[start].gap != op.anchor:
            _fail(policy, workspace, f"span {op.deleted.surfaces} not found at anchor {op.anchor}")
            continue
        workspace.splice(start, len(op.deleted), _replacement_tokens(op, markers), op.anchor)


def _apply_matched_replacements(workspace: _Workspace, script: EditScript, policy: Policy, markers: MarkerSet):
    # right to left, each span at its leftmost occurrence in the current utterance
    for op in reversed(script.replacements):
        start = workspace.find(op.deleted)
        if start is None:
            _fail(policy, workspace, f"span {op.deleted.surfaces} not found")
            continue
        workspace.splice(start, len(op.deleted), _replacement_tokens(op, markers), workspace.cells[start].gap)


def _apply_anchored_insertions(workspace: _Workspace, script: EditScript, policy: Policy):
    by_gap = {}
    for op in script.insertions:
        if op.anchor is None:
            _fail(policy, workspace, f"insertion {op.inserted.surfaces} has no anchor")
            continue
        by_gap.setdefault(op.anchor, []).extend(op.inserted.tokens)
    # right to left so earlier positions stay valid
    for gap in sorted(by_gap, reverse=True):
        workspace.splice(workspace.gap_position(gap), 0, by_gap[gap], None)


def _apply_random_insertions(workspace: _Workspace, script: EditScript, rng: np.random.Generator):
    for op in script.insertions:
        position = int(rng.integers(0, len(workspace.cells) + 1))
        workspace.splice(position, 0, op.inserted.tokens, None)


def apply_with_report(incomplete: TokenSeq, script: EditScript, strategy: "Strategy | str" = Strategy.ANCHORED,
                      rng: np.random.Generator | None = None, policy: "Policy | str" = Policy.STRICT,
                      markers: MarkerSet = DEFAULT_MARKERS) -> tuple[TokenSeq, int]:
    '''Apply a script, also reporting how many ops were skipped.

    Replacements go first, right to left: ANCHORED at their anchors,
    MATCHED and RANDOM at the leftmost occurrence of the deleted span in
    the current utterance. Insertions follow: ANCHORED and MATCHED at their
    anchored gaps (ops at one gap in script order), RANDOM at a gap drawn
    uniformly from 0..len for each insertion.

    Parameters
    ----------
    incomplete : TokenSeq
    script : EditScript
    strategy : Strategy | str, optional
        by default Strategy.ANCHORED
    rng : np.random.Generator | None, optional
        required by RANDOM
    policy : Policy | str, optional
        STRICT raises on an op that cannot be placed, LENIENT skips it,
        by default Policy.STRICT
    markers : MarkerSet, optional
        supplies the NONE sentinel

    Returns
    -------
    tuple[TokenSeq, int]
        edited utterance and the number of skipped ops
    '''
    strategy = enum_from_name(Strategy, strategy)
    policy = enum_from_name(Policy, policy)
    if strategy is Strategy.ANCHORED and script.ops:
        if not script.is_anchored() or script.source_len != len(incomplete):
            raise PivotError("anchored application needs every anchor and source_len equal to the utterance length")
        script.check()
    if strategy is Strategy.RANDOM and rng is None and script.insertions:
        raise PivotError("random insertion needs a random stream")
    workspace = _Workspace([_Cell(token, index) for index, token in enumerate(incomplete)])
    if strategy is Strategy.ANCHORED and script.ops:
        _apply_anchored_replacements(workspace, script, policy, markers)
    else:
        _apply_matched_replacements(workspace, script, policy, markers)
    if strategy is Strategy.RANDOM:
        _apply_random_insertions(workspace, script, rng)
    else:
        _apply_anchored_insertions(workspace, script, policy)
    tokens = tuple(cell.token for cell in workspace.cells)
    return TokenSeq(tokens, incomplete.mode), workspace.skipped


def apply(incomplete: TokenSeq, script: EditScript, strategy: "Strategy | str" = Strategy.ANCHORED,
          rng: np.random.Generator | None = None, policy: "Policy | str" = Policy.STRICT,
          markers: MarkerSet = DEFAULT_MARKERS) -> TokenSeq:
    '''Apply a script to an incomplete utterance (see apply_with_report)'''
    result, _ = apply_with_report(incomplete, script, strategy, rng, policy, markers)
    return result


def split_rfis(script: EditScript) -> tuple[EditScript, EditScript]:
    '''Split a script into (replacements, insertions), keeping order and anchors'''
    return (
        EditScript(script.replacements, script.source_len),
        EditScript(script.insertions, script.source_len)
        )
