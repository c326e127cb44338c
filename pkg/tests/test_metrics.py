import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from teachstyle.metrics import ccc, rmse

from . import oracles

vectors = hnp.arrays(np.float64, st.integers(2, 30), elements=st.floats(-1e3, 1e3, allow_nan=False))


class TestRmse:
    def test_exact_fit(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit_offset(self):
        assert rmse([0.0, 0.0], [1.0, 1.0]) == 1.0

    def test_against_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 50))
            y, p = rng.normal(size=n), rng.normal(size=n)
            assert abs(rmse(y, p) - oracles.rmse(y.tolist(), p.tolist())) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])


class TestCcc:
    def test_identity(self):
        y = np.random.default_rng(0).normal(size=20)
        assert ccc(y, y) == 1.0

    def test_constant_prediction(self):
        y = np.random.default_rng(0).normal(size=20)
        assert ccc(y, np.full(20, 0.3)) == 0.0

    def test_negation(self):
        y = np.array([-2.0, -1.0, 1.0, 2.0])
        assert ccc(y, -y) == -1.0

    def test_degenerate_constants(self):
        assert ccc([2.0, 2.0], [2.0, 2.0]) == 1.0
        assert ccc([2.0, 2.0], [3.0, 3.0]) == 0.0

    def test_against_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            n = int(rng.integers(2, 40))
            y = rng.normal(size=n)
            p = 0.7 * y + rng.normal(scale=0.5, size=n) + rng.normal()
            assert abs(ccc(y, p) - oracles.ccc(y.tolist(), p.tolist())) < 1e-12

    @given(vectors, st.data())
    @settings(max_examples=200, deadline=None)
    def test_symmetric_and_bounded(self, y, data):
        p = data.draw(hnp.arrays(np.float64, len(y), elements=st.floats(-1e3, 1e3, allow_nan=False)))
        c = ccc(y, p)
        assert -1.0 <= c <= 1.0
        assert c == pytest.approx(ccc(p, y), abs=1e-12)

    def test_too_short(self):
        with pytest.raises(ValueError):
            ccc([1.0], [1.0])
