import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cimdcsk import chaos, walsh
from cimdcsk.errors import InvalidParameterError
from cimdcsk.modem import (
    SrParams,
    SystemParams,
    backscatter_receive,
    backscatter_statistics,
    cim_modulate,
    decide_direct,
    direct_receive,
    direct_statistics,
    sr_modulate,
    sr_receive,
    sr_statistics,
    sr_tag_modulate,
    sr_tag_pattern,
    tag_modulate,
)


def _x(L, seed=0):
    return chaos.generate(L, seed).chips


class TestParams:
    def test_derived(self):
        p = SystemParams(4, 8, 25)
        assert (p.beta, p.M, p.m_c, p.blocks, p.direct_bits, p.total_bits) == (300, 2, 1, 3, 2, 5)

    def test_from_beta(self):
        assert SystemParams.from_beta(4, 8, 120).L == 10
        with pytest.raises(InvalidParameterError):
            SystemParams.from_beta(4, 8, 301)

    @pytest.mark.parametrize("args", [(3, 8, 10), (0, 8, 10), (4, 6, 10), (4, 2, 10), (4, 8, 0), (4, 8, 10, 0.0), (4, 8, 10, 1.5)])
    def test_invalid(self, args):
        with pytest.raises(InvalidParameterError):
            SystemParams(*args)


class TestCimModulate:
    def test_all_ones_code(self):
        p = SystemParams(4, 8, 5)
        x = _x(5)
        s = cim_modulate(1, [0], x, p)
        assert s.index == 1 and s.modulated_bit == 1
        np.testing.assert_allclose(s.chips.reshape(12, 5), np.tile(x, (12, 1)))

    def test_row5_negative_bit(self):
        p = SystemParams(4, 8, 5)
        x = _x(5)
        s = cim_modulate(0, [1], x, p)
        signs = [1, 1, 1, 1, -1, -1, -1, -1, 1, 1, 1, 1]
        np.testing.assert_allclose(s.chips.reshape(12, 5), np.outer(signs, x))

    def test_energy(self):
        p = SystemParams(4, 16, 7)
        x = _x(7)
        s = cim_modulate(1, [1, 0], x, p)
        assert np.dot(s.chips, s.chips) == pytest.approx(20 * np.dot(x, x))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidParameterError):
            cim_modulate(1, [0], _x(6), SystemParams(4, 8, 5))
        with pytest.raises(InvalidParameterError):
            cim_modulate(1, [0, 1], _x(5), SystemParams(4, 8, 5))
        with pytest.raises(InvalidParameterError):
            cim_modulate(2, [0], _x(5), SystemParams(4, 8, 5))


class TestTag:
    def test_pattern_positive(self):
        p = SystemParams(4, 0 + 4, 3)
        x = _x(3)
        inc = np.tile(x, 8)
        out = tag_modulate(inc, [1, 1], p).chips.reshape(8, 3)
        np.testing.assert_allclose(out[:4], np.outer([1, -1, 1, -1], x))

    def test_pattern_negative_half_zeta(self):
        p = SystemParams(4, 4, 3, zeta=0.5)
        x = _x(3)
        out = tag_modulate(np.tile(x, 8), [0, 1], p).chips.reshape(8, 3)
        np.testing.assert_allclose(out[:4], 0.5 * np.outer([1, -1, -1, 1], x))

    def test_bits_recorded(self):
        p = SystemParams(4, 8, 3)
        assert tag_modulate(np.ones(36), [1, 0, 1], p).bits == (1, -1, 1)

    def test_length_mismatch(self):
        p = SystemParams(4, 8, 3)
        with pytest.raises(InvalidParameterError):
            tag_modulate(np.ones(35), [1, 0, 1], p)
        with pytest.raises(InvalidParameterError):
            tag_modulate(np.ones(36), [1, 0], p)
        with pytest.raises(InvalidParameterError):
            tag_modulate(np.ones(36), [1, 0, 2], p)


def _all_patterns(P2):
    p = SystemParams(4, P2, 6)
    book = walsh.build(P2)
    for mod, v, bs in itertools.product((0, 1), range(book.M), itertools.product((0, 1), repeat=p.blocks)):
        yield p, book, mod, walsh.index_to_bits(1 + 4 * v, book), list(bs)


class TestOrthogonality:
    @pytest.mark.parametrize("P2", [4, 8, 16])
    def test_direct_and_reflected_orthogonal(self, P2):
        x = _x(6, P2)
        for p, book, mod, idx, bs in _all_patterns(P2):
            s = cim_modulate(mod, idx, x, p, book)
            r = tag_modulate(s, bs, p)
            cos = np.dot(s.chips, r.chips) / (np.linalg.norm(s.chips) * np.linalg.norm(r.chips))
            assert abs(cos) < 1e-9

    @pytest.mark.parametrize("P2", [4, 8, 16])
    def test_reflected_alone_gives_zero_direct_statistics(self, P2):
        x = _x(6, 1)
        for p, book, mod, idx, bs in _all_patterns(P2):
            r = tag_modulate(cim_modulate(mod, idx, x, p, book), bs, p).chips
            np.testing.assert_allclose(direct_statistics(r, p, book), 0.0, atol=1e-9)

    def test_direct_alone_gives_zero_backscatter_statistics(self):
        x = _x(6, 2)
        for p, book, mod, idx, _ in _all_patterns(8):
            s = cim_modulate(mod, idx, x, p, book)
            np.testing.assert_allclose(backscatter_statistics(s.chips, p), 0.0, atol=1e-12)
            assert backscatter_receive(s.chips, p) == [1] * p.blocks  # tie rule


class TestReceivers:
    @pytest.mark.parametrize("P2", [4, 8, 16, 32])
    def test_noiseless_loopback(self, P2):
        x = _x(6, 3)
        for p, book, mod, idx, bs in itertools.islice(_all_patterns(P2), 64):
            s = cim_modulate(mod, idx, x, p, book)
            r = s.chips + tag_modulate(s, bs, p).chips
            assert direct_receive(r, p, book) == (idx, mod)
            assert direct_receive(s.chips, p, book) == (idx, mod)
            assert backscatter_receive(r, p) == bs

    def test_backscatter_statistic_value(self):
        p = SystemParams(4, 8, 6)
        x = _x(6, 4)
        s = cim_modulate(1, [0], x, p)
        D = backscatter_statistics(tag_modulate(s, [1, 0, 1], p).chips, p)
        np.testing.assert_allclose(D, 4 * np.dot(x, x) * np.array([1, -1, 1]))

    def test_tie_rules(self):
        pos, bit = decide_direct(np.array([[0.0, 0.0], [-1.0, 1.0], [0.5, -2.0]]))
        np.testing.assert_array_equal(pos, [0, 0, 1])
        np.testing.assert_array_equal(bit, [1, 0, 0])

    def test_length_mismatch(self):
        p = SystemParams(4, 8, 6)
        with pytest.raises(InvalidParameterError):
            direct_receive(np.ones(71), p)
        with pytest.raises(InvalidParameterError):
            backscatter_receive(np.ones(73), p)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.1, 10))
    def test_statistics_bilinear(self, seed, a):
        p = SystemParams(4, 8, 5)
        book = walsh.build(8)
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal((2, p.beta))
        np.testing.assert_allclose(direct_statistics(a * u, p, book), a * a * direct_statistics(u, p, book), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(backscatter_statistics(a * u, p), a * a * backscatter_statistics(u, p), rtol=1e-9, atol=1e-12)
        # additive in the information part for a fixed reference part
        ref = p.P1 * p.L
        v[:ref] = u[:ref]
        w = u.copy()
        w[ref:] += v[ref:]
        np.testing.assert_allclose(
            direct_statistics(w, p, book), direct_statistics(u, p, book) + direct_statistics(v, p, book), rtol=1e-9, atol=1e-9
        )


class TestSrBenchmark:
    def test_params(self):
        sr = SrParams(297, 8)
        assert sr.R == 33 and sr.replicas == 9
        with pytest.raises(InvalidParameterError):
            SrParams(300, 8)
        with pytest.raises(InvalidParameterError):
            SrParams(297, 2)  # alternating halves need P divisible by 4

    def test_modulate(self):
        x = _x(33)
        s = sr_modulate(1, x, 8)
        np.testing.assert_allclose(s.reshape(9, 33), np.tile(x, (9, 1)))
        assert np.dot(s, s) == pytest.approx(9 * np.dot(x, x))
        np.testing.assert_allclose(sr_modulate(0, x, 8).reshape(9, 33)[1:], -np.tile(x, (8, 1)))

    def test_tag_pattern(self):
        np.testing.assert_allclose(sr_tag_pattern(1, 1.0, 8), [0, 1, -1, 1, -1, 1, -1, 1, -1])
        np.testing.assert_allclose(sr_tag_pattern(0, 0.5, 4), [0, 0.5, -0.5, -0.5, 0.5])

    @pytest.mark.parametrize("mod,bs", list(itertools.product((0, 1), repeat=2)))
    def test_orthogonal_and_loopback(self, mod, bs):
        x = _x(11, 5)
        s = sr_modulate(mod, x, 8)
        r = sr_tag_modulate(s, bs, 0.7, 8)
        assert abs(np.dot(s[11:], r[11:])) < 1e-9 * np.dot(s, s)
        d, _ = sr_statistics(r, 11, 8)
        _, b = sr_statistics(s, 11, 8)
        assert abs(d) < 1e-9 and abs(b) < 1e-9
        assert sr_receive(s + r, 11, 8) == (mod, bs)
        assert sr_receive(s, 11, 8)[0] == mod

    def test_errors(self):
        x = _x(11)
        with pytest.raises(InvalidParameterError):
            sr_receive(np.ones(98), 11, 8)
        with pytest.raises(InvalidParameterError):
            sr_tag_modulate(sr_modulate(1, x, 8), 2, 1.0, 8)
        with pytest.raises(InvalidParameterError):
            sr_tag_modulate(sr_modulate(1, x, 8), 1, 0.0, 8)
        with pytest.raises(InvalidParameterError):
            sr_modulate(3, x, 8)
