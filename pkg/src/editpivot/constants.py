'''
constants.py
author(s): editpivot developers

Global constants

(c) Copyright editpivot developers 2024
'''

# unicode scripts tokenized one character at a time in AUTO mode
CJK_SCRIPTS = [
    "Han",
    "Hiragana",
    "Katakana",
    "Hangul",
    "Bopomofo"
    ]

CJK_CLASS = "".join(rf"\p{{{script}}}" for script in CJK_SCRIPTS)

# punctuation and symbols are split off words
PUNCT_CLASS = r"\p{P}\p{S}"


# mapping from config backend kinds to python class names
BACKEND_MAPPING = {
    "command": "CommandBackend",
    "http": "HttpBackend",
    "gold": "GoldBackend",
    "identity": "IdentityBackend",
    "empty": "EmptyBackend"
}


# mapping from file suffixes to corpus formats
FORMAT_MAPPING = {
    ".jsonl": "jsonl",
    ".json": "jsonl",
    ".tsv": "tsv",
    ".txt": "tsv"
}


# environment variables with this prefix override config keys
ENV_PREFIX = "EDITPIVOT_"
ENV_DELIMITER = "__"

# http backoff starts here (seconds) and doubles per retry
BACKOFF_BASE = 0.5
