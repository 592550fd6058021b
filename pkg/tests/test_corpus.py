import logging
import os
from pathlib import Path

from editpivot.corpus import (
    DialogueSample,
    PreparedExample,
    build_stage1,
    build_stage2,
    build_stage2_from_predictions,
    context_prompt,
    gold_ops,
    load,
    load_prepared,
    save,
    save_prepared,
    stats
)
from editpivot.editscript import Strategy, apply, parse, split_rfis
from editpivot.generic_classes import PivotError, make_stream
from editpivot.perturb import PerturbConfig
from editpivot.text import TokenSeq
from funcs_for_tests import BATMAN_GROUPED_OPS, BATMAN_OPS
import pytest

pivot_err = pytest.raises(PivotError)

BATMAN_PROMPT = ("[CLS] I think Batman is very handsome. [SEP] The poster looks a bit like Ben Affleck. "
                 "[SEP] It is he who acted. [SEP]")


@pytest.fixture
def sample_corpus(sample_corpus_path):
    return load(sample_corpus_path)


def write_lines(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_jsonl(sample_corpus, batman):
    assert [sample.id for sample in sample_corpus] == ["batman", "no_edit", "duan_yu"]
    assert sample_corpus[0] == batman


def test_load_defaults(tmp_path):
    path = write_lines(tmp_path / "corpus.jsonl", [
        '{"history": ["a"], "incomplete": "b", "rewritten": ""}',
        '',
        '{"incomplete": "c"}',
        ])
    corpus = load(path)
    assert [sample.id for sample in corpus] == ["1", "3"]
    assert corpus[0].rewritten is None
    assert corpus[1].history == ()
    assert corpus[1].rewritten is None


def test_load_tsv(tmp_path):
    path = write_lines(tmp_path / "corpus.tsv", ["h1\tinc\trew", "h1\th2\tinc2\trew2", "only\t"])
    corpus = load(path)
    assert corpus[0] == DialogueSample("1", ("h1",), "inc", "rew")
    assert corpus[1].history == ("h1", "h2")
    assert corpus[2].history == () and corpus[2].rewritten is None
    assert load(write_lines(tmp_path / "corpus.dat", ["h\ti\tr"]), "TSV")[0].incomplete == "i"


@pytest.mark.parametrize("lines, message", [
    (['{"incomplete": "a"}', '{"incomplete": '], "line 2"),
    (['{"history": ["a"]}'], "incomplete"),
    (['{"incomplete": "  "}'], "incomplete"),
    (['{"incomplete": "a", "history": "a"}'], "history"),
    (['{"incomplete": "a", "rewritten": 3}'], "rewritten"),
    (['["a"]'], "json object"),
    (['{"id": "x", "incomplete": "a"}', '{"id": "x", "incomplete": "b"}'], "duplicate"),
])
def test_load_errors(tmp_path, lines, message):
    path = write_lines(tmp_path / "corpus.jsonl", lines)
    with pytest.raises(PivotError, match=message):
        load(path)


def test_load_bad_files(tmp_path):
    with pivot_err:
        load(write_lines(tmp_path / "empty.jsonl", [""]))
    with pivot_err:
        load(write_lines(tmp_path / "corpus.csv", ["a,b"]))
    with pivot_err:
        load(write_lines(tmp_path / "short.tsv", ["only"]))


def test_save_load_identity(sample_corpus, tmp_path):
    path = tmp_path / "nested" / "corpus.jsonl"
    save(sample_corpus, path)
    assert load(path) == sample_corpus
    first = path.read_bytes()
    save(load(path), path)
    assert path.read_bytes() == first
    assert "段誉" in path.read_text(encoding="utf-8")


def test_stats(sample_corpus):
    corpus_stats = stats(sample_corpus)
    assert corpus_stats.avg_cont_len == pytest.approx(32 / 3)
    assert corpus_stats.avg_curr_len == pytest.approx(13 / 3)
    assert corpus_stats.avg_rewr_len == pytest.approx(22 / 3)
    assert (corpus_stats.n_insertion, corpus_stats.n_replacement) == (2, 1)
    assert corpus_stats.to_dict()["n_samples"] == 3


def test_stats_single(batman, no_edit):
    assert (stats([batman]).n_insertion, stats([batman]).n_replacement) == (1, 1)
    assert (stats([no_edit]).n_insertion, stats([no_edit]).n_replacement) == (0, 0)
    with pivot_err:
        stats([])
    with pivot_err:
        stats([DialogueSample("x", (), "a")])


def test_context_prompt(batman, sample_corpus):
    assert context_prompt(batman) == BATMAN_PROMPT
    assert context_prompt(sample_corpus[2]) == "[CLS] 我最喜欢段誉 [SEP] 他的武功最高 [SEP] 为什么 [SEP]"
    assert context_prompt(DialogueSample("x", (), "hi")) == "[CLS] [SEP] hi [SEP]"


def test_build_stage1(sample_corpus):
    examples = build_stage1(sample_corpus)
    assert examples[0].input == BATMAN_PROMPT
    assert examples[0].target == BATMAN_OPS
    assert examples[1].target == ""
    assert examples[2].target == "[I] 段誉武功最高"
    assert examples[0].meta == {"perturbed": False, "variant": "stage1"}
    assert build_stage1(sample_corpus, "grouped")[0].target == BATMAN_GROUPED_OPS


def test_gold_ops_needs_rewritten():
    with pytest.raises(PivotError, match="sample x"):
        gold_ops(DialogueSample("x", (), "a"))


def test_marker_literal_skipped(sample_corpus, caplog):
    literal = DialogueSample("literal", ("a b",), "b", "b [I] c")
    corpus = [*sample_corpus, literal]
    with pytest.raises(PivotError, match="sample literal"):
        gold_ops(literal)
    with caplog.at_level(logging.WARNING, logger="editpivot.corpus"):
        stage1 = build_stage1(corpus)
        stage2 = build_stage2(corpus, PerturbConfig(prob_p=0.0))
    ids = [sample.id for sample in sample_corpus]
    assert [example.id for example in stage1] == ids
    assert [example.id for example in stage2] == ids
    assert caplog.text.count("skipping sample literal") == 2
    # no ops to serialize without the pivot
    assert build_stage2(corpus, PerturbConfig(), use_gold_ops=False)[-1].id == "literal"


def test_build_stage2_identity(sample_corpus):
    examples = build_stage2(sample_corpus, PerturbConfig(prob_p=0.0))
    assert examples[0].input == f"{BATMAN_PROMPT} {BATMAN_OPS} [SEP]"
    assert examples[0].target == "It is Ben Affleck who acted as Batman."
    assert examples[1].input == "[CLS] How are you? [SEP] I am fine. [SEP] [SEP]"
    assert not any(example.meta["perturbed"] for example in examples)
    predicted = {sample.id: gold_ops(sample) for sample in sample_corpus}
    from_predictions = build_stage2_from_predictions(sample_corpus, predicted, with_targets=True)
    assert from_predictions == examples


def test_build_stage2_no_pivot(sample_corpus):
    examples = build_stage2(sample_corpus, PerturbConfig(), use_gold_ops=False)
    assert examples[0].input == f"{BATMAN_PROMPT} [SEP]"
    assert examples[2].target == "为什么段誉武功最高"


def test_build_stage2_deterministic(sample_corpus, tmp_path):
    cfg = PerturbConfig(prob_p=1.0, prob_r=0.5, seed=5)
    first, second = build_stage2(sample_corpus, cfg), build_stage2(sample_corpus, cfg)
    assert [example.input for example in first] == [example.input for example in second]
    save_prepared(first, tmp_path / "first.jsonl")
    save_prepared(second, tmp_path / "second.jsonl")
    assert (tmp_path / "first.jsonl").read_bytes() == (tmp_path / "second.jsonl").read_bytes()
    assert all(example.meta["perturbed"] for example in first)
    # per-sample streams do not depend on corpus order
    reversed_inputs = {example.id: example.input for example in build_stage2(sample_corpus[::-1], cfg)}
    assert reversed_inputs == {example.id: example.input for example in first}


def test_build_stage2_seed_matters(sample_corpus):
    inputs = {
        tuple(example.input for example in build_stage2(sample_corpus, PerturbConfig(prob_p=1.0, seed=seed)))
        for seed in range(10)
        }
    assert len(inputs) > 1


def test_empty_history_falls_back_to_utterance():
    sample = DialogueSample("x", (), "a b c", "a b x c")
    example, = build_stage2([sample], PerturbConfig(prob_p=1.0, prob_r=1.0, max_span_len=1))
    ops = example.input.split(" [SEP] ")[-1]
    assert any(token in ops for token in ("a", "b", "c"))


def test_build_from_predictions(no_edit, batman):
    examples = build_stage2_from_predictions([no_edit, batman], {"no_edit": "", "batman": "[D] [D] junk"})
    assert examples[0].input == "[CLS] How are you? [SEP] I am fine. [SEP] [SEP]"
    assert examples[1].input == f"{BATMAN_PROMPT} [D] [D] junk [SEP]"
    assert examples[1].target is None
    assert examples[1].meta["variant"] == "stage2_predicted"
    with pivot_err:
        build_stage2_from_predictions([batman], {})


def test_prepared_round_trip(sample_corpus, tmp_path):
    examples = build_stage2(sample_corpus, PerturbConfig(seed=3))
    save_prepared(examples, tmp_path / "stage2.jsonl")
    loaded = load_prepared(tmp_path / "stage2.jsonl")
    assert loaded == examples
    assert [example.meta for example in loaded] == [example.meta for example in examples]
    with pivot_err:
        load_prepared(write_lines(tmp_path / "bad.jsonl", ['{"id": "a"}']))


def test_sample_validation():
    with pivot_err:
        DialogueSample("x", (), "")
    with pivot_err:
        DialogueSample("x", ("a", 3), "b")
    with pivot_err:
        DialogueSample("x", (), "a").require_rewritten()
    assert PreparedExample("a", "b", meta={"k": 1}) == PreparedExample("a", "b")


def reachable(tokens: list, spans: list, target: list) -> bool:
    '''Whether inserting spans in order at some gaps turns tokens into target'''
    if not spans:
        return tokens == target
    head, rest = spans[0], spans[1:]
    return any(reachable(tokens[:gap] + head + tokens[gap:], rest, target) for gap in range(len(tokens) + 1))


def distinct_pair(rng) -> tuple[list[str], list[str]]:
    '''Pair whose utterance has distinct tokens and whose edits bring in new ones'''
    incomplete = [str(token) for token in rng.permutation(list("abcdef"))[:int(rng.integers(1, 6))]]
    rewritten = list(incomplete)
    for _ in range(int(rng.integers(1, 4))):
        position = int(rng.integers(0, len(rewritten) + 1))
        new = [str(token) for token in rng.choice(list("wxyz"), size=int(rng.integers(1, 3)))]
        if rng.random() < 0.5:
            rewritten[position:position] = new
        else:
            rewritten[position:position + 1] = new
    return incomplete, rewritten


def test_stage1_targets_reachable():
    rng = make_stream(77)
    for index in range(300):
        incomplete, rewritten = distinct_pair(rng)
        sample = DialogueSample(str(index), ("h",), " ".join(incomplete), " ".join(rewritten))
        example, = build_stage1([sample])
        script, diagnostics = parse(example.target, strict=True)
        assert diagnostics == []
        replacements, insertions = split_rfis(script)
        replaced = apply(TokenSeq.from_surfaces(incomplete), replacements, Strategy.MATCHED)
        spans = [list(op.inserted.surfaces) for op in insertions]
        assert reachable(list(replaced.surfaces), spans, rewritten)


REWRITE_TRAIN = os.environ.get("EDITPIVOT_REWRITE_TRAIN")


@pytest.mark.slow
@pytest.mark.skipif(not REWRITE_TRAIN, reason="EDITPIVOT_REWRITE_TRAIN not set")
def test_rewrite_dataset_stats():
    corpus_stats = stats(load(REWRITE_TRAIN))
    assert corpus_stats.n_insertion == pytest.approx(14070, rel=0.02)
    assert corpus_stats.n_replacement == pytest.approx(7853, rel=0.02)
