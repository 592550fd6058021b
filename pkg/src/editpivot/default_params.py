'''
default_params.py
author(s): editpivot developers

default configuration tree

(c) Copyright editpivot developers 2024
'''

STAGE_BACKEND = {
    "kind": "identity",
    "endpoint": "",
    "timeout": 60.0,
    "retries": 3
}

DEFAULT_CONFIG = {
    "seed": 0,
    "text": {
        "mode": "auto"
    },
    "markers": {
        "insert": "[I]",
        "delete": "[D]",
        "replace": "[R]",
        "none": "[NONE]",
        "cls": "[CLS]",
        "sep": "[SEP]"
    },
    "editscript": {
        "layout": "positional",
        "policy": "strict",
        "strategy": "anchored"
    },
    "perturb": {
        "prob_p": 0.6,
        "prob_r": 0.5,
        "max_span_len": 5,
        "random_replace": True,
        "random_delete": True,
        "random_insert": True
    },
    "backends": {
        "stage1": dict(STAGE_BACKEND),
        "stage2": dict(STAGE_BACKEND)
    },
    "metrics": {
        "bleu_orders": [1, 2, 3, 4],
        "rouge_orders": [1, 2],
        "restoration_orders": [1, 2, 3]
    },
    "engine": {
        "max_in_flight": 4,
        "progress": True
    },
    "output": {
        "destination": "./"
    }
}
