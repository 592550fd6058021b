'''
parsing.py
author(s): editpivot developers

Classes and functions to read configuration files and corpus paths

(c) Copyright editpivot developers 2024
'''

import copy
import json
import logging
import os
from pathlib import Path

import toml

from editpivot.constants import ENV_DELIMITER, ENV_PREFIX, FORMAT_MAPPING
from editpivot.default_params import DEFAULT_CONFIG
from editpivot.generic_classes import PivotError

logger = logging.getLogger(__name__)


def extract_data(filename) -> dict:
    '''Load dictionary from a toml or json file

    Parameters
    ----------
    filename : str | Path
        path to the file, .json is read as json and anything else as toml

    Returns
    -------
    dict
        data inside the file
    '''
    path = Path(filename)
    try:
        with open(path, encoding="utf-8") as config_file:
            if path.suffix.lower() == ".json":
                return json.load(config_file)
            return toml.load(config_file)
    except (json.JSONDecodeError, toml.TomlDecodeError) as error:
        raise PivotError(f"could not parse {path}: {error}")


def parse_env_value(raw: str):
    '''Read an environment string as a toml value, or keep it as a string'''
    try:
        return toml.loads(f"value = {raw}")["value"]
    except toml.TomlDecodeError:
        return raw


def env_overrides(environ=None, delimiter: str = "/") -> dict:
    '''Collect config overrides from the environment.

    EDITPIVOT_PERTURB__PROB_P=0.3 becomes {"perturb/prob_p": 0.3}. Variables
    whose first key is not a top-level config key (EDITPIVOT_REWRITE_TRAIN) are
    not config overrides and are ignored.

    Parameters
    ----------
    environ : Mapping, optional
        by default os.environ
    delimiter : str, optional
        key path delimiter, by default '/'

    Returns
    -------
    dict
        key path -> value
    '''
    environ = os.environ if environ is None else environ
    overrides = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key_route = name[len(ENV_PREFIX):].lower().split(ENV_DELIMITER)
        if key_route[0] not in DEFAULT_CONFIG:
            logger.debug(f"ignoring {name}: {key_route[0]} is not a config key")
            continue
        overrides[delimiter.join(key_route)] = parse_env_value(raw)
    return overrides


class ParameterFiller():
    '''Fill in missing configuration parameters with defaults.

    Attributes
    ----------
    log: list
        stores info about the config processing step
    config: dict
        the configuration being processed
    defaults: dict
        default configuration tree
    '''
    def __init__(self, defaults: dict = DEFAULT_CONFIG):
        self.log = []
        self.config = {}
        self.defaults = defaults

    def add_log(self, message: str):
        '''Add message to log'''
        logger.debug(message)
        self.log.append(message)

    def process_config(self, config: dict) -> dict:
        '''Fill in missing parameters of a config tree with default values

        Parameters
        ----------
        config : dict
            user configuration, possibly partial

        Returns
        -------
        dict
            filled configuration
        '''
        if not isinstance(config, dict):
            raise PivotError(f"configuration must be a table: {config!r}")
        self.config = self.__fill_params(copy.deepcopy(config), copy.deepcopy(self.defaults), [])
        return self.config

    def print_log(self):
        '''Print messages in log'''
        for message in self.log:
            print(message)

    def __fill_params(self, config: dict, defaults: dict, key_route: list) -> dict:
        '''Fill the missing keys of one table, recursing into sub-tables

        Parameters
        ----------
        config : dict
            table to fill
        defaults : dict
            default key-value pairs for the same table
        key_route : list
            keys leading to this table

        Returns
        -------
        dict
            filled table
        '''
        unknown = sorted(set(config) - set(defaults))
        if unknown:
            paths = ", ".join("/".join(key_route + [str(key)]) for key in unknown)
            raise PivotError(f"unknown configuration keys: {paths}")
        for key, default_value in defaults.items():
            path = "/".join(key_route + [key])
            if key not in config:
                config[key] = default_value
                self.add_log(f"key {path} not specified. Added default.")
            elif isinstance(default_value, dict):
                if not isinstance(config[key], dict):
                    raise PivotError(f"{path} must be a table")
                config[key] = self.__fill_params(config[key], default_value, key_route + [key])
            else:
                self.add_log(f"{path} set to: {config[key]} (default: {default_value})")
        return config


def get_format(path, format_type: str | None = None) -> str:
    '''Get the corpus format of a file

    Parameters
    ----------
    path : str | Path
        corpus file
    format_type : str | None, optional
        explicit format name, wins over the suffix

    Returns
    -------
    str
        "jsonl" or "tsv"
    '''
    if format_type is not None:
        format_type = format_type.lower()
        if format_type not in FORMAT_MAPPING.values():
            raise PivotError(f"Unrecognised format: {format_type}")
        return format_type
    suffix = Path(path).suffix.lower()
    if suffix not in FORMAT_MAPPING:
        raise PivotError(f"Unrecognised format for file: {path}")
    return FORMAT_MAPPING[suffix]
