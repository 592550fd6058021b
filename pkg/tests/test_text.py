from editpivot.text import (
    Token,
    TokenKind,
    TokenMode,
    TokenSeq,
    classify,
    concat,
    detokenize,
    normalize,
    tokenize
)
from editpivot.generic_classes import MarkerSet, PivotError
from hypothesis import given, strategies as st
import pytest

pivot_err = pytest.raises(PivotError)

PIECES = ["a", "bc", "Ben", "x1", "你", "好", "段", "。", ",", "!", "?", "(", " ", "  ", "\t", "[I]", "[D]", "[SEP]", "[NONE]"]
texts = st.lists(st.sampled_from(PIECES), max_size=20).map("".join)
modes = st.sampled_from(list(TokenMode))


def test_tokenize_english():
    tokens = tokenize("It is he who acted.")
    assert tokens.surfaces == ("It", "is", "he", "who", "acted", ".")
    assert tokens[-1].kind is TokenKind.PUNCT
    assert tokens[0].kind is TokenKind.WORD


def test_tokenize_cjk():
    tokens = tokenize("为什么喜欢段誉？")
    assert tokens.surfaces == ("为", "什", "么", "喜", "欢", "段", "誉", "？")
    assert all(token.kind is TokenKind.CJK_CHAR for token in tokens[:-1])
    assert detokenize(tokens) == "为什么喜欢段誉？"


def test_tokenize_mixed():
    tokens = tokenize("我用Python写code")
    assert tokens.surfaces == ("我", "用", "Python", "写", "code")
    assert detokenize(tokens) == "我用 Python 写 code"


def test_markers_atomic():
    tokens = tokenize("[D]he [R] Ben[I]as")
    assert tokens.surfaces == ("[D]", "he", "[R]", "Ben", "[I]", "as")
    assert [token.kind for token in tokens] == [
        TokenKind.MARKER, TokenKind.WORD, TokenKind.MARKER, TokenKind.WORD, TokenKind.MARKER, TokenKind.WORD
        ]
    assert detokenize(tokens) == "[D] he [R] Ben [I] as"


def test_special_literals_are_words():
    tokens = tokenize("[CLS] hi [SEP] [NONE]")
    assert tokens.surfaces == ("[CLS]", "hi", "[SEP]", "[NONE]")
    assert not tokens.has_kind(TokenKind.MARKER)


def test_custom_markers():
    markers = MarkerSet(insert="<ins>", delete="<del>", replace="<rep>")
    tokens = tokenize("<del> he <rep> Ben", markers=markers)
    assert tokens.surfaces == ("<del>", "he", "<rep>", "Ben")
    assert tokens[0].kind is TokenKind.MARKER
    # default literals are ordinary text here
    assert tokenize("[I]", markers=markers).surfaces == ("[", "I", "]")


def test_char_mode():
    tokens = tokenize("ab c", TokenMode.CHAR)
    assert tokens.surfaces == ("a", "b", "c")
    assert detokenize(tokens) == "a b c"


def test_whitespace_mode():
    tokens = tokenize("(hello), 世界!", TokenMode.WHITESPACE)
    assert tokens.surfaces == ("(", "hello", ")", ",", "世界", "!")
    assert not tokens.has_kind(TokenKind.CJK_CHAR)


def test_detokenize_mode():
    tokens = tokenize("ab c", "char")
    assert detokenize(tokens, TokenMode.CHAR) == detokenize(tokens, "char") == "a b c"
    assert tokenize(detokenize(tokens, "char"), "char") == tokens
    with pivot_err:
        detokenize(tokens, "bytes")


def test_empty():
    assert len(tokenize("")) == 0
    assert len(tokenize("   \n")) == 0
    assert detokenize(tokenize("")) == ""


def test_tokenize_type():
    with pytest.raises(TypeError):
        tokenize(None)


def test_mode_from_name():
    assert TokenMode.from_name("CHAR") is TokenMode.CHAR
    assert TokenMode.from_name(TokenMode.AUTO) is TokenMode.AUTO
    with pivot_err:
        TokenMode.from_name("words")


def test_token_validation():
    with pivot_err:
        Token("a b", TokenKind.WORD)
    with pivot_err:
        Token("", TokenKind.WORD)
    with pivot_err:
        Token("你好", TokenKind.CJK_CHAR)


def test_classify():
    assert classify("[R]") is TokenKind.MARKER
    assert classify("[SEP]") is TokenKind.WORD
    assert classify("你") is TokenKind.CJK_CHAR
    assert classify("你", TokenMode.WHITESPACE) is TokenKind.WORD
    assert classify("。") is TokenKind.PUNCT
    assert classify("$") is TokenKind.PUNCT


def test_seq_operations():
    first, second = tokenize("a b"), tokenize("c")
    joined = first + second
    assert joined.surfaces == ("a", "b", "c")
    assert isinstance(joined[1:], TokenSeq)
    assert concat([first, second, tokenize("")]) == joined
    assert str(joined) == "a b c"


def test_equality_ignores_mode():
    assert tokenize("a b", TokenMode.AUTO) == tokenize("a b", TokenMode.WHITESPACE)


@given(texts, modes)
def test_normalize_idempotent(text, mode):
    once = normalize(text, mode)
    assert normalize(once, mode) == once


@given(texts, modes)
def test_retokenize_identity(text, mode):
    tokens = tokenize(text, mode)
    assert tokenize(detokenize(tokens, mode), mode) == tokens
