import math

import pytest

import fdm


def test_vocab_layout_and_encoders():
    assert fdm.vocab.SEPARATOR == 33204
    assert fdm.vocab.TABLE_SIZE == 33205
    assert fdm.encode_discrete(7) == 7
    assert fdm.encode_continuous(0.0) == 32512
    assert fdm.encode_continuous(1.0) == 32744
    assert abs(fdm.decode_continuous(32512)) < 0.01
    with pytest.raises(fdm.RangeError):
        fdm.encode_discrete(1024)


def test_text_tokenizer_round_trip(tmp_path):
    tok = fdm.suite_tokenizer()
    ids = tok.tokenize("a red circle and a blue square")
    assert len(ids) == 7
    assert tok.detokenize(ids) == "a red circle and a blue square"
    tok.save(tmp_path / "tok.fdmv")
    assert fdm.TextTokenizer.load(tmp_path / "tok.fdmv").tokenize("go to the red ball") == \
        tok.tokenize("go to the red ball")


def test_schedule_and_oracle():
    assert fdm.lr_at(0, "db1") == 0.0
    assert math.isclose(fdm.lr_at(15000, "db1"), 5e-5, abs_tol=1e-12)
    order, length = fdm.tsp_oracle([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert length == 4.0
    assert sorted(order) == [0, 1, 2, 3]


def test_scores():
    assert fdm.normalized_score([2.0, 2.0], -1.0, 2.0) == 1.0
    with pytest.raises(fdm.DataError):
        fdm.normalized_score([1.0], 0.5, 0.5)
    for suite in fdm.suite_names():
        assert fdm.evaluate_baseline(suite, "expert", episodes=5)["score"] == 1.0
    r = fdm.evaluate_baseline("gridworld", "random", episodes=20)
    assert abs(r["score"]) < 0.2
    with pytest.raises(fdm.ConfigError):
        fdm.evaluate_baseline("gridworld", "oracle")


def test_pipeline_through_python(tmp_path):
    data, cache, run = tmp_path / "data", tmp_path / "cache", tmp_path / "run"
    info = fdm.generate_expert_data(data, "gridworld", seed=3, count=4)
    assert info["episodes"] == 4 and info["mean_return"] == 1.0
    assert fdm.build_index(data, cache, seq_len=64)["gridworld"] > 0

    small = ["--set", "model.seq_len=64", "--set", "model.blocks=1", "--set", "model.width=32",
             "--set", "model.heads=2", "--set", "model.ffn_size=64", "--set", "train.batch=2"]
    paths = ["--data", str(data), "--cache", str(cache), "--run", str(run)]
    code, out, err = fdm.run_cli(paths + small + ["train", "--steps", "2"])
    assert code == 0, err
    ckpt = fdm.checkpoint_info(run / "checkpoint.fdmc")
    assert ckpt["step"] == 2 and ckpt["model"]["width"] == 32

    code, _, err = fdm.run_cli(paths + ["--set", "nope=1", "train"])
    assert code == 1 and "nope" in err
