import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from affinecrack import cipher
from affinecrack.cipher import decrypt, index_to_key
from affinecrack.dataset import (
    PAD,
    DatasetConfig,
    build_dataset,
    letter_frequencies,
    load_dataset,
    pad_or_truncate,
    preprocess_corpus,
    random_key,
    sample_plaintexts,
    save_dataset,
)
from affinecrack.errors import (
    ConfigError,
    DigestMismatchError,
    EmptyCorpusError,
    FormatVersionError,
    InsufficientCorpusError,
    MalformedFileError,
)


def test_preprocess_examples():
    assert preprocess_corpus("Ab, c!").tolist() == [0, 1, 2]
    assert preprocess_corpus("ZZZ").tolist() == [25, 25, 25]
    assert preprocess_corpus("héllo wörld 42").tolist() == preprocess_corpus("hllowrld").tolist()
    with pytest.raises(EmptyCorpusError):
        preprocess_corpus("")
    with pytest.raises(EmptyCorpusError):
        preprocess_corpus("123 ,.!")


@given(st.text(min_size=1).filter(lambda t: any(c.isascii() and c.isalpha() for c in t)))
def test_preprocess_idempotent(text):
    once = preprocess_corpus(text)
    assert np.array_equal(preprocess_corpus(cipher.render(once)), once)
    assert once.max() <= 25


def test_bundled_corpus_is_english(corpus):
    assert corpus.size > 1_000_000
    counts = np.bincount(corpus, minlength=26)
    assert counts.argmax() == cipher.map_char("E")


def test_sample_plaintexts_boundaries():
    corpus = np.arange(100, dtype=np.uint8) % 26
    cfg = DatasetConfig(seq_len=100, num_samples=1)
    windows = sample_plaintexts(corpus, cfg, np.random.default_rng(0))
    assert np.array_equal(windows[0], corpus)
    with pytest.raises(InsufficientCorpusError):
        sample_plaintexts(corpus[:99], cfg, np.random.default_rng(0))


def test_sample_plaintexts_deterministic_and_contiguous(corpus):
    cfg = DatasetConfig(seq_len=50, num_samples=2, seed=42)
    a = sample_plaintexts(corpus, cfg, np.random.default_rng(42))
    b = sample_plaintexts(corpus, cfg, np.random.default_rng(42))
    assert np.array_equal(a, b)
    blob = corpus.tobytes()
    for row in a:
        assert row.tobytes() in blob


def test_random_key_valid_and_deterministic():
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    s1 = [random_key(r1) for _ in range(200)]
    s2 = [random_key(r2) for _ in range(200)]
    assert s1 == s2
    for k in s1:
        k.validate()


def test_random_key_uniform():
    rng = np.random.default_rng(2024)
    n = 312_000
    idx = np.array([cipher.key_to_index(random_key(rng)) for _ in range(n)])
    counts = np.bincount(idx, minlength=312)
    p = 1 / 312
    sigma = np.sqrt(n * p * (1 - p))
    # each per-key frequency within 3 sigma would fail by chance for ~1 of 312 keys,
    # so the per-key band is checked at 4.5 sigma and the joint fit with chi-square
    assert np.all(np.abs(counts - n * p) <= 4.5 * sigma)
    assert stats.chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize(
    "n,fracs,sizes",
    [(10, (0.8, 0.1, 0.1), (8, 1, 1)), (1000, (0.8, 0.1, 0.1), (800, 100, 100)), (7, (1, 0, 0), (7, 0, 0))],
)
def test_partition_sizes(n, fracs, sizes):
    assert DatasetConfig(seq_len=5, num_samples=n, split_fractions=fracs).partition_sizes() == sizes


def test_config_validation():
    with pytest.raises(ConfigError):
        DatasetConfig(seq_len=0)
    with pytest.raises(ConfigError):
        DatasetConfig(seq_len=10, split_fractions=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        DatasetConfig(seq_len=10, seed=-1)


@pytest.fixture(scope="module")
def small_ds():
    return build_dataset(DatasetConfig(seq_len=40, num_samples=10, seed=3))


def test_build_dataset_consistency(small_ds):
    assert small_ds.sizes == (8, 1, 1)
    seen = set()
    for name in ("train", "validation", "test"):
        for s in small_ds.partition(name):
            assert len(s.ciphertext) == len(s.plaintext) == 40
            assert np.array_equal(decrypt(s.ciphertext, index_to_key(s.key_index)), s.plaintext)
            seen.add((s.ciphertext.tobytes(), s.key_index))
    assert len(seen) == 10


def test_build_dataset_deterministic(tmp_path, small_ds):
    again = build_dataset(small_ds.config)
    assert again == small_ds
    p1, p2 = tmp_path / "a.afds", tmp_path / "b.afds"
    save_dataset(small_ds, p1)
    save_dataset(again, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_key_marginal_uniform(corpus):
    ds = build_dataset(DatasetConfig(seq_len=1, num_samples=100_000, seed=77), corpus=corpus)
    labels = np.concatenate([ds.train.key_index, ds.validation.key_index, ds.test.key_index])
    assert stats.chisquare(np.bincount(labels, minlength=312)).pvalue > 0.001


def test_letter_frequencies_examples():
    f = letter_frequencies([0, 0, 1])
    assert f[0] == pytest.approx(2 / 3) and f[1] == pytest.approx(1 / 3)
    assert f[2:].sum() == 0
    assert np.array_equal(letter_frequencies([PAD] * 5), np.zeros(26))
    assert letter_frequencies([0, PAD, PAD, 1]).tolist()[:2] == [0.5, 0.5]


@given(st.lists(st.integers(0, 26), min_size=1, max_size=300), st.randoms())
def test_letter_frequencies_properties(tokens, random):
    f = letter_frequencies(tokens)
    if any(t != PAD for t in tokens):
        assert abs(f.sum() - 1) < 1e-12
    shuffled = list(tokens)
    random.shuffle(shuffled)
    assert np.array_equal(letter_frequencies(shuffled), f)


def test_letter_frequencies_batch_matches_rows(rng):
    batch = rng.integers(0, 27, size=(5, 30))
    rows = np.stack([letter_frequencies(r) for r in batch])
    assert np.array_equal(letter_frequencies(batch), rows)


def test_pad_or_truncate():
    assert pad_or_truncate([1, 2], 4).tolist() == [1, 2, PAD, PAD]
    assert pad_or_truncate([1, 2, 3], 2).tolist() == [1, 2]


def test_save_load_roundtrip(tmp_path, small_ds):
    path = tmp_path / "d.afds"
    save_dataset(small_ds, path)
    loaded = load_dataset(path, expected_corpus_digest=small_ds.corpus_digest)
    assert loaded == small_ds
    assert loaded.config == small_ds.config


def test_load_errors(tmp_path, small_ds):
    path = tmp_path / "d.afds"
    save_dataset(small_ds, path)
    blob = path.read_bytes()

    (tmp_path / "trunc.afds").write_bytes(blob[:-7])
    with pytest.raises(MalformedFileError):
        load_dataset(tmp_path / "trunc.afds")
    (tmp_path / "tiny.afds").write_bytes(blob[:5])
    with pytest.raises(MalformedFileError):
        load_dataset(tmp_path / "tiny.afds")

    (tmp_path / "v9.afds").write_bytes(blob.replace(b'"format_version": 1', b'"format_version": 9'))
    with pytest.raises(FormatVersionError):
        load_dataset(tmp_path / "v9.afds")

    flipped = bytearray(blob)
    flipped[-1] ^= 1
    (tmp_path / "flip.afds").write_bytes(bytes(flipped))
    with pytest.raises(DigestMismatchError):
        load_dataset(tmp_path / "flip.afds")

    with pytest.raises(DigestMismatchError):
        load_dataset(path, expected_corpus_digest=hashlib.sha256(b"other").hexdigest())
