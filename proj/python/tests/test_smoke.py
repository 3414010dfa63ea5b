import numpy as np
import pytest

import swcap


def test_tokenize_lowercases_and_strips_punctuation():
    assert swcap.tokenize("A red Square, above.") == ["a", "red", "square", "above"]


def test_identical_corpus_scores_one():
    docs = [("a red square", ["a red square"]), ("a blue circle on the left", ["a blue circle on the left"])]
    table = swcap.score(docs)
    assert table["bleu4"] == pytest.approx(1.0)
    assert table["rouge_l"] == pytest.approx(1.0)
    total, per_doc = swcap.cider_d(docs)
    assert len(per_doc) == 2
    assert total == pytest.approx(np.mean(per_doc))


def test_bleu_unigram_precision():
    docs = [("the cat the cat", ["the cat sat on the mat"])]
    assert swcap.bleu(docs, 1)[0] == pytest.approx(np.exp(1 - 6 / 4) * 3 / 4)


def test_partition_merge_roundtrip():
    grid = np.random.default_rng(0).normal(size=(4, 6, 3))
    windows = swcap.window_partition(grid, 2)
    assert windows.shape == (6, 4, 3)
    np.testing.assert_array_equal(swcap.window_merge(windows, 4, 6), grid)


def test_cyclic_shift_matches_numpy_roll():
    grid = np.arange(4 * 4 * 2, dtype=float).reshape(4, 4, 2)
    np.testing.assert_array_equal(swcap.cyclic_shift(grid, 1, 1), np.roll(grid, (-1, -1), axis=(0, 1)))


def test_synthetic_is_deterministic():
    a = swcap.generate_synthetic(count=5, seed=3)
    b = swcap.generate_synthetic(count=5, seed=3)
    assert [x["caption"] for x in a] == [x["caption"] for x in b]
    assert a[0]["image"].shape == (16, 16, 3)
    np.testing.assert_array_equal(a[0]["image"], b[0]["image"])


def test_captioner_roundtrip(tmp_path):
    scenes = swcap.generate_synthetic(count=4, seed=2)
    words = sorted({w for s in scenes for w in swcap.tokenize(s["caption"])})
    vocab = ["<bos>", "<eos>", "<pad>", "<unk>"] + words
    path = tmp_path / "model.ckpt"
    swcap.init_checkpoint(path, vocab, '{"max_len": 6}', seed=4)
    single = swcap.Captioner([path])
    twins = swcap.Captioner([path, path])
    for s in scenes:
        one = single.caption(s["image"], beam=3)
        two = twins.caption(s["image"], beam=3)
        assert one == two
        assert len(one["tokens"]) <= 6
        assert np.isfinite(one["log_prob"])


def test_errors_surface_as_exceptions(tmp_path):
    with pytest.raises(swcap.SwcapError):
        swcap.Captioner([tmp_path / "missing.ckpt"])
    with pytest.raises(swcap.SwcapError):
        swcap.window_partition(np.zeros((3, 3, 1)), 2)
