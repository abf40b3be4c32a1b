import numpy as np
import pytest
from hypothesis import given, strategies as st

from affinecrack import cipher
from affinecrack.cipher import AffineKey, decrypt, encrypt, index_to_key, key_to_index, mod_inverse
from affinecrack.errors import KeyIndexRangeError, KeyValidationError, NoInverseError

keys = st.sampled_from(cipher.enumerate_keys())
texts = st.lists(st.integers(0, 25), max_size=200)


def test_valid_coefficients():
    assert cipher.VALID_A == (1, 3, 5, 7, 9, 11, 15, 17, 19, 21, 23, 25)
    assert cipher.NUM_KEYS == 312


@pytest.mark.parametrize("ch,value", [("A", 0), ("Z", 25), ("M", 12)])
def test_map_char(ch, value):
    assert cipher.map_char(ch) == value


@pytest.mark.parametrize("bad", ["a", "1", " ", "AB", ""])
def test_map_char_rejects(bad):
    with pytest.raises(ValueError):
        cipher.map_char(bad)


def test_encrypt_examples():
    assert encrypt([0, 1, 2], (1, 0)) == [0, 1, 2]
    assert encrypt([0], (5, 8)) == [8]
    # per-letter (5x + 8) mod 26 worked by hand: 8, 33, 33, 48, 73, 28
    assert encrypt([0, 5, 5, 8, 13, 4], (5, 8)) == [8, 7, 7, 22, 21, 2]
    assert cipher.render(encrypt([cipher.map_char(c) for c in "AFFINE"], (5, 8))) == "IHHWVC"


def test_decrypt_examples():
    assert decrypt([8], (5, 8)) == [0]
    assert decrypt([0, 1, 2], (1, 0)) == [0, 1, 2]
    assert cipher.render(decrypt([cipher.map_char(c) for c in "IHHWVC"], (5, 8))) == "AFFINE"


def test_numpy_arrays_keep_dtype():
    x = np.array([0, 5, 25], dtype=np.uint8)
    y = encrypt(x, (5, 8))
    assert y.dtype == np.uint8
    assert np.array_equal(decrypt(y, (5, 8)), x)


@pytest.mark.parametrize("key", [(2, 0), (13, 1), (0, 0), (26, 0), (1, 26), (1, -1)])
def test_invalid_keys(key):
    with pytest.raises(KeyValidationError):
        encrypt([0], key)
    with pytest.raises(KeyValidationError):
        decrypt([0], key)
    with pytest.raises(KeyValidationError):
        key_to_index(key)


def _brute_inverse(a):
    return next(x for x in range(26) if a * x % 26 == 1)


@pytest.mark.parametrize("a,inv", [(1, 1), (5, 21), (25, 25)])
def test_mod_inverse_examples(a, inv):
    assert mod_inverse(a) == inv == _brute_inverse(a)


def test_mod_inverse_exhaustive():
    for a in cipher.VALID_A:
        assert a * mod_inverse(a) % 26 == 1
    for a in (0, 2, 13, 24):
        with pytest.raises(NoInverseError):
            mod_inverse(a)


@pytest.mark.parametrize("key,index", [((1, 0), 0), ((25, 25), 311), ((3, 4), 30)])
def test_key_codec_examples(key, index):
    assert key_to_index(key) == index
    assert index_to_key(index) == AffineKey(*key)


def test_key_codec_bijection():
    for i in range(312):
        assert key_to_index(index_to_key(i)) == i
    assert [key_to_index(k) for k in cipher.enumerate_keys()] == list(range(312))
    for bad in (-1, 312, 1000):
        with pytest.raises(KeyIndexRangeError):
            index_to_key(bad)


def test_enumerate_keys():
    ks = cipher.enumerate_keys()
    assert len(ks) == 312 == len(set(ks))
    assert ks[0] == AffineKey(1, 0)
    assert len({k.a for k in ks}) == 12


def test_every_key_is_a_bijection():
    for k in cipher.enumerate_keys():
        assert sorted(encrypt(list(range(26)), k)) == list(range(26))


def test_encryption_table_matches_encrypt():
    table = cipher.encryption_table()
    for i, k in enumerate(cipher.enumerate_keys()):
        assert table[i].tolist() == encrypt(list(range(26)), k)


@given(texts, keys)
def test_roundtrip(p, k):
    assert decrypt(encrypt(p, k), k) == p


@given(texts, keys, keys)
def test_composition(p, k1, k2):
    assert encrypt(encrypt(p, k1), k2) == encrypt(p, cipher.compose(k1, k2))
    a1, b1 = k1
    a2, b2 = k2
    assert cipher.compose(k1, k2) == ((a2 * a1) % 26, (a2 * b1 + b2) % 26)
