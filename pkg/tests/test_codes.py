import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qid.analysis.binary_entropy import h
from qid.codes import (
    PRESET_BLOCKS,
    BasisCode,
    CodeSearchError,
    LinearCode,
    SyndromeFamily,
    build_basis_code,
    choose_block_code,
    gv_feasible,
    pairwise_min_distance,
    preset_code,
    str_to_bases,
)


def brute_distance(code: LinearCode) -> int:
    words = [np.array(w, np.uint8) for w in itertools.product([0, 1], repeat=code.n)]
    return min(int(w.sum()) for w in words
               if w.any() and not ((code.parity_check @ w) % 2).any())


def test_repetition_basis_code():
    code = build_basis_code(2, 4, 4, seed=1)
    assert code.to_text().splitlines()[1:] == ["++++", "xxxx"]
    assert code.d == 4


def test_four_word_code_distance():
    words = ["00000000", "11111111", "01010101", "10101010"]
    code = BasisCode(np.array([str_to_bases(w) for w in words]))
    assert code.d == 4


def test_target_beyond_length():
    with pytest.raises(ValueError):
        build_basis_code(2, 4, 5)


def test_search_budget_error_reports_best():
    with pytest.raises(CodeSearchError) as err:
        build_basis_code(8, 6, 6, seed=0, restarts=3)
    assert 0 <= err.value.best_distance < 6


@pytest.mark.parametrize("m,n", [(3, 8), (4, 16), (8, 64), (8, 32), (16, 128), (5, 40)])
def test_basis_code_meets_gv_and_is_reproducible(m, n):
    target = gv_feasible(n, m)
    a = build_basis_code(m, n, target, seed=3)
    b = build_basis_code(m, n, target, seed=3)
    assert a.d >= target
    assert a.d == pairwise_min_distance(a.codewords)
    assert np.array_equal(a.codewords, b.codewords)
    assert not a.codewords[0].any()


def test_basis_code_text_round_trip():
    code = build_basis_code(4, 16, 6, seed=0)
    again = BasisCode.from_text(code.to_text())
    assert np.array_equal(again.codewords, code.codewords)
    bad = code.to_text().replace(f"d={code.d}", f"d={code.d + 1}")
    with pytest.raises(ValueError):
        BasisCode.from_text(bad)


def test_info_set():
    code = BasisCode(np.array([str_to_bases("++xx"), str_to_bases("xxxx")]))
    assert list(code.info_set(str_to_bases("+x+x"), 1)) == [0, 3]
    assert list(code.info_set(str_to_bases("++xx"), 1)) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        code.encode(3)


def test_info_set_mean_size():
    code = build_basis_code(4, 32, 8, seed=0)
    rng = np.random.default_rng(0)
    sizes = [code.info_set(rng.integers(0, 2, 32), 2).size for _ in range(10_000)]
    sigma = math.sqrt(32 * 0.25 / 10_000)
    assert abs(np.mean(sizes) - 16) <= 3 * sigma


def test_gv_feasible():
    assert gv_feasible(10, 2 ** 10) == 0
    assert gv_feasible(100, 2 ** 50) == math.floor(100 * 0.11002786443835955)
    assert abs(h(gv_feasible(1000, 2 ** 500) / 1000) - 0.5) < 1e-2
    with pytest.raises(ValueError):
        gv_feasible(4, 17)


def test_gv_inverse_round_trips():
    from qid.analysis.binary_entropy import h_inverse
    assert abs(h(h_inverse(0.99)) - 0.99) < 1e-6
    assert abs(h(h_inverse(0.5)) - 0.5) < 1e-4
    assert abs(h_inverse(0.5) - 0.11003) < 1e-5


@pytest.mark.parametrize("bk", PRESET_BLOCKS)
def test_preset_distances_exact(bk):
    code = preset_code(*bk)
    assert (code.n, code.k) == bk
    if code.n <= 15:
        assert code.d == brute_distance(code)
    assert code.decode_radius == (code.d - 1) // 2


def test_hamming_single_errors():
    code = LinearCode.hamming(3)
    assert (code.n, code.k, code.d) == (7, 4, 3)
    gen = code.generator
    for msg in itertools.product([0, 1], repeat=4):
        cw = (np.array(msg, np.uint8) @ gen) % 2
        assert code.syndrome_int(cw)[0] == 0
        for i in range(7):
            e = np.zeros(7, np.uint8)
            e[i] = 1
            col = int("".join(map(str, code.parity_check[:, i])), 2)
            assert code.syndrome_int(cw ^ e)[0] == col


@pytest.mark.parametrize("code", [LinearCode.hamming(3), preset_code(15, 7), preset_code(15, 5),
                                  preset_code(15, 11), preset_code(15, 1)])
def test_every_correctable_pattern_decodes(code):
    rng = np.random.default_rng(0)
    words = rng.integers(0, 2, size=(4, code.n), dtype=np.uint8)
    for wt in range(code.decode_radius + 1):
        for pos in itertools.combinations(range(code.n), wt):
            e = np.zeros(code.n, np.uint8)
            e[list(pos)] = 1
            fixed, ok = code.correct(words ^ e, code.syndrome_int(words))
            assert ok.all() and np.array_equal(fixed, words)


def test_double_errors_never_silently_correct():
    code = LinearCode.hamming(3)
    y = np.array([1, 0, 1, 1, 0, 0, 1], np.uint8)
    s = code.syndrome_int(y)
    for i, j in itertools.combinations(range(7), 2):
        noisy = y.copy()
        noisy[[i, j]] ^= 1
        fixed, ok = code.correct(noisy, s)
        # a perfect code always "succeeds", but never with the true word
        assert not (ok[0] and np.array_equal(fixed[0], y))


def test_linear_code_text_round_trip():
    code = preset_code(31, 16)
    again = LinearCode.from_text(code.to_text())
    assert np.array_equal(again.parity_check, code.parity_check)
    assert again.d == code.d == 7


def test_random_linear_code():
    code = LinearCode.random(12, 4, 5, seed=2)
    assert code.d >= 5
    assert code.d == brute_distance(code)
    again = LinearCode.random(12, 4, 5, seed=2)
    assert np.array_equal(code.parity_check, again.parity_check)


def test_rank_deficient_rejected():
    with pytest.raises(ValueError):
        LinearCode(np.array([[1, 1, 0], [1, 1, 0]], np.uint8))


def test_block_choice():
    assert choose_block_code(0.05).decode_radius / choose_block_code(0.05).n >= 0.15
    assert choose_block_code(0.0).redundancy / choose_block_code(0.0).n < 0.2


# --------------------------------------------------------------------------
# syndrome family

def test_family_deterministic_per_index():
    fam = SyndromeFamily.for_length(100, 0.05, seed=5)
    y = np.random.default_rng(1).integers(0, 2, fam.length, dtype=np.uint8)
    assert np.array_equal(fam.syndrome_bits(7, y), fam.syndrome_bits(7, y))
    assert not np.array_equal(fam.syndrome_bits(7, y), fam.syndrome_bits(8, y))


def test_zero_word_zero_syndrome():
    fam = SyndromeFamily.for_length(64, 0.02)
    assert not fam.syndrome_bits(3, np.zeros(fam.length, np.uint8)).any()


def test_fixed_family_hamming():
    fam = SyndromeFamily.fixed(LinearCode.hamming(3))
    y = np.array([0, 1, 1, 0, 1, 0, 1], np.uint8)
    s = fam.syndrome_bits(0, y)
    for i in range(7):
        noisy = y.copy()
        noisy[i] ^= 1
        assert np.array_equal(fam.decode(0, noisy, s), y)


@settings(deadline=None, max_examples=60)
@given(st.integers(1, 300), st.integers(0, 2**64 - 1), st.data())
def test_family_corrects_within_radius_any_length(ylen, j, data):
    fam = SyndromeFamily.for_length(120, 0.05, seed=1)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    y = rng.integers(0, 2, ylen, dtype=np.uint8)
    s = fam.syndrome_bits(j, y)
    head = min(ylen, fam.length)
    nerr = data.draw(st.integers(0, min(fam.decode_radius, head)))
    noisy = y.copy()
    noisy[rng.choice(head, nerr, replace=False)] ^= 1
    assert np.array_equal(fam.decode(j, noisy, s), y)


def test_family_blockwise_errors_beyond_radius_fail_or_differ():
    fam = SyndromeFamily(preset_code(15, 7), 2, seed=0)
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 30, dtype=np.uint8)
    s = fam.syndrome_bits(1, y)
    for pos in itertools.combinations(range(15), 3):
        noisy = y.copy()
        noisy[list(pos)] ^= 1
        out = fam.decode(1, noisy, s)
        assert out is None or not np.array_equal(out, y)


def test_short_input_padding_is_checked():
    fam = SyndromeFamily(LinearCode.hamming(3), 1, permute=False)
    y = np.array([1, 0, 1], np.uint8)
    s = fam.syndrome_bits(0, y)
    assert np.array_equal(fam.decode(0, y, s), y)
    # a syndrome pointing at a padding position must not be "corrected" there
    column5 = fam.base.parity_check[:, 5]
    assert fam.decode(0, y, s ^ column5) is None


def test_wrong_syndrome_length_fails():
    fam = SyndromeFamily.for_length(40, 0.05)
    y = np.zeros(30, np.uint8)
    assert fam.decode(0, y, np.zeros(3, np.uint8)) is None
