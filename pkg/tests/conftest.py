import pytest
from editpivot.corpus import DialogueSample
from editpivot.text import tokenize
from funcs_for_tests import BATMAN_HISTORY, BATMAN_INCOMPLETE, BATMAN_REWRITTEN


@pytest.fixture
def testpath(pytestconfig):
    return pytestconfig.rootpath / "tests"


@pytest.fixture
def sample_corpus_path(testpath):
    return testpath / "sample_test.jsonl"


@pytest.fixture
def sample_config_path(testpath):
    return testpath / "sample_config.toml"


@pytest.fixture
def batman():
    return DialogueSample("batman", BATMAN_HISTORY, BATMAN_INCOMPLETE, BATMAN_REWRITTEN)


@pytest.fixture
def batman_tokens():
    return tokenize(BATMAN_INCOMPLETE), tokenize(BATMAN_REWRITTEN)


@pytest.fixture
def no_edit():
    return DialogueSample("no_edit", ("How are you?",), "I am fine.", "I am fine.")
