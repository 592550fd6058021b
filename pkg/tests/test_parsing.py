from editpivot.parsing import (
    extract_data,
    env_overrides,
    parse_env_value,
    ParameterFiller,
    get_format
)
from editpivot.default_params import DEFAULT_CONFIG
from editpivot.generic_classes import PivotError
import pytest

pivot_err = pytest.raises(PivotError)


@pytest.fixture
def p_filler():
    return ParameterFiller()


def test_extract_data(sample_config_path):
    data = extract_data(sample_config_path)
    assert data["seed"] == 7
    assert data["backends"]["stage2"]["kind"] == "gold"


def test_extract_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"seed": 3, "text": {"mode": "char"}}', encoding="utf-8")
    assert extract_data(path) == {"seed": 3, "text": {"mode": "char"}}
    path.write_text('{"seed": ', encoding="utf-8")
    with pivot_err:
        extract_data(path)


def test_extract_bad_toml(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text("seed = = 3", encoding="utf-8")
    with pivot_err:
        extract_data(path)


def test_parse_env_value():
    assert parse_env_value("0.3") == 0.3
    assert parse_env_value("true") is True
    assert parse_env_value("[1, 2]") == [1, 2]
    assert parse_env_value('"grouped"') == "grouped"
    assert parse_env_value("grouped") == "grouped"


def test_env_overrides():
    environ = {
        "EDITPIVOT_PERTURB__PROB_P": "0.3",
        "EDITPIVOT_SEED": "9",
        "EDITPIVOT_BACKENDS__STAGE1__ENDPOINT": "http://localhost:8000",
        "HOME": "/root"
        }
    assert env_overrides(environ) == {
        "perturb/prob_p": 0.3,
        "seed": 9,
        "backends/stage1/endpoint": "http://localhost:8000"
        }
    assert env_overrides({"EDITPIVOT_TEXT__MODE": "char"}, delimiter=".") == {"text.mode": "char"}


def test_env_overrides_skip_non_config(caplog):
    environ = {"EDITPIVOT_REWRITE_TRAIN": "/data/rewrite/train.tsv", "EDITPIVOT_SEED": "3"}
    with caplog.at_level("DEBUG", logger="editpivot.parsing"):
        assert env_overrides(environ) == {"seed": 3}
    assert "ignoring EDITPIVOT_REWRITE_TRAIN" in caplog.text
    # unknown keys inside a config section are still passed on, and rejected later
    assert env_overrides({"EDITPIVOT_PERTURB__PROB_Q": "0.1"}) == {"perturb/prob_q": 0.1}


# ParameterFiller tests
def test_add_log(p_filler):
    p_filler.add_log("test message")
    assert "test message" in p_filler.log


def test_process_config(sample_config_path, p_filler):
    config = p_filler.process_config(extract_data(sample_config_path))
    assert config["seed"] == 7
    assert config["editscript"]["layout"] == "grouped"
    assert config["editscript"]["policy"] == DEFAULT_CONFIG["editscript"]["policy"]
    assert config["perturb"]["prob_p"] == 0.0
    assert config["perturb"]["prob_r"] == DEFAULT_CONFIG["perturb"]["prob_r"]
    assert config["backends"]["stage2"]["kind"] == "gold"
    assert config["backends"]["stage1"] == DEFAULT_CONFIG["backends"]["stage1"]
    assert "key text not specified. Added default." in p_filler.log
    assert "perturb/prob_p set to: 0.0 (default: 0.6)" in p_filler.log


def test_process_empty_config(p_filler):
    assert p_filler.process_config({}) == DEFAULT_CONFIG


def test_defaults_untouched(p_filler):
    config = p_filler.process_config({})
    config["perturb"]["prob_p"] = 0.1
    config["metrics"]["bleu_orders"].append(5)
    assert DEFAULT_CONFIG["perturb"]["prob_p"] == 0.6
    assert DEFAULT_CONFIG["metrics"]["bleu_orders"] == [1, 2, 3, 4]


def test_process_config_errors(p_filler):
    with pytest.raises(PivotError, match="perturb/prob_q"):
        p_filler.process_config({"perturb": {"prob_q": 0.1}})
    with pytest.raises(PivotError, match="colour"):
        p_filler.process_config({"colour": "blue"})
    with pytest.raises(PivotError, match="must be a table"):
        p_filler.process_config({"perturb": 0.1})
    with pivot_err:
        p_filler.process_config(["seed"])


def test_print_log(p_filler, capsys):
    p_filler.log = []
    p_filler.add_log("test message")
    p_filler.print_log()
    captured = capsys.readouterr()
    assert captured.out == "test message\n"


def test_get_format():
    assert get_format("data/train.jsonl") == "jsonl"
    assert get_format("train.JSON") == "jsonl"
    assert get_format("train.tsv") == "tsv"
    assert get_format("train.txt") == "tsv"
    assert get_format("train.data", "TSV") == "tsv"
    with pivot_err:
        get_format("train.csv")
    with pivot_err:
        get_format("train.jsonl", "xml")
