import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from teachstyle.annotate import (
    AnnotationRecord,
    QuestionnaireResponse,
    aggregate_labels,
    build_lexicon,
    cronbach_alpha,
    load_annotations,
    rating_matrix,
    save_annotations,
    score_response,
    synth_annotations,
    zscore_normalize,
)
from teachstyle.core import PACoordinate, default_lexicon

from . import oracles

answers = st.integers(-2, 2)


def _rec(utt, ann, q=(0, 0, 0, 0), votes=()):
    return AnnotationRecord(utt, ann, QuestionnaireResponse(*q), frozenset(votes))


class TestScoreResponse:
    @pytest.mark.parametrize(
        "q, expected",
        [((0, 0, 0, 0), (0, 0)), ((-2, -2, 2, 2), (4, 4)), ((1, 1, -1, -1), (-2, -2))],
    )
    def test_examples(self, q, expected):
        assert score_response(QuestionnaireResponse(*q)) == expected

    def test_all_625_combinations(self):
        for q in itertools.product(range(-2, 3), repeat=4):
            assert score_response(QuestionnaireResponse(*q)) == oracles.score(*q)

    @given(st.tuples(answers, answers, answers, answers), st.tuples(answers, answers, answers, answers))
    def test_linear(self, a, b):
        s = tuple(x + y for x, y in zip(a, b))
        if all(-2 <= x <= 2 for x in s):
            sa, sb = score_response(QuestionnaireResponse(*a)), score_response(QuestionnaireResponse(*b))
            assert score_response(QuestionnaireResponse(*s)) == (sa[0] + sb[0], sa[1] + sb[1])

    @pytest.mark.parametrize("bad", [3, -3, 1.5, True])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            QuestionnaireResponse(bad, 0, 0, 0)


class TestZscore:
    def test_examples(self):
        np.testing.assert_array_equal(zscore_normalize([-1, 1]), [-1, 1])
        np.testing.assert_array_equal(zscore_normalize([0, 2]), [-1, 1])

    def test_moments(self):
        z = zscore_normalize(np.random.default_rng(0).normal(3, 7, size=1000))
        assert abs(z.mean()) < 1e-9
        assert abs(z.var() - 1.0) < 1e-9

    def test_matches_oracle(self):
        x = np.random.default_rng(1).normal(size=50)
        np.testing.assert_allclose(zscore_normalize(x), oracles.zscore(x.tolist()), atol=1e-12)

    def test_zero_variance(self):
        with pytest.raises(ValueError, match="zero variance"):
            zscore_normalize([2, 2, 2])

    def test_too_short(self):
        with pytest.raises(ValueError):
            zscore_normalize([1.0])


class TestAggregate:
    def test_single_record_refused(self):
        with pytest.raises(ValueError):
            aggregate_labels([_rec("u1", "a1")])

    def test_shift_scale(self):
        # raw pleasure means 0 and 4, arousal means -2 and 2
        recs = [
            _rec("u1", "a1", (1, 0, 0, -1)), _rec("u1", "a2", (1, 0, 0, -1)),
            _rec("u2", "a1", (-1, -2, 2, 1)), _rec("u2", "a2", (-1, -2, 2, 1)),
        ]
        labels = aggregate_labels(recs)
        assert labels["u1"] == PACoordinate(-1.0, -1.0)
        assert labels["u2"] == PACoordinate(1.0, 1.0)

    def test_against_two_pass_oracle(self):
        rng = np.random.default_rng(5)
        recs = []
        for u in range(30):
            for a in range(int(rng.integers(2, 6))):
                recs.append(_rec(f"u{u:02d}", f"a{a}", tuple(rng.integers(-2, 3, size=4).tolist())))
        labels = aggregate_labels(recs)
        ids = sorted({r.utterance_id for r in recs})
        raw = {u: [score_response(r.response) for r in recs if r.utterance_id == u] for u in ids}
        p = oracles.zscore([oracles.mean(s[0] for s in raw[u]) for u in ids])
        a = oracles.zscore([oracles.mean(s[1] for s in raw[u]) for u in ids])
        for u, pu, au in zip(ids, p, a):
            assert abs(labels[u].pleasure - pu) < 1e-12
            assert abs(labels[u].arousal - au) < 1e-12

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            aggregate_labels([_rec("u1", "a1"), _rec("u1", "a1"), _rec("u2", "a1")])


class TestCronbach:
    def test_duplicated_raters(self):
        col = np.random.default_rng(0).normal(size=20)
        assert cronbach_alpha(np.column_stack([col, col, col])) == pytest.approx(1.0, abs=1e-12)

    def test_zero_covariance(self):
        # centred columns with zero sample covariance
        r1 = np.array([1.0, -1.0, 1.0, -1.0])
        r2 = np.array([1.0, 1.0, -1.0, -1.0])
        m = np.column_stack([r1, r2])
        assert cronbach_alpha(m) == pytest.approx(0.0, abs=1e-12)
        assert oracles.cronbach_alpha(m) == pytest.approx(0.0, abs=1e-12)

    def test_against_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = rng.normal(size=(20, 4)) + rng.normal(size=(20, 1))
            assert abs(cronbach_alpha(m) - oracles.cronbach_alpha(m.tolist())) < 1e-9

    def test_constant_totals(self):
        with pytest.raises(ValueError):
            cronbach_alpha(np.ones((5, 3)))

    def test_rating_matrix_shape(self):
        recs = [_rec(f"u{u}", f"a{a}", (a, u % 3 - 1, 0, 0)) for u in range(4) for a in range(3)]
        m = rating_matrix(recs, "pleasure")
        assert m.shape == (4, 3)


class TestBuildLexicon:
    def test_unanimous_single_point(self):
        recs = [_rec("u1", f"a{i}", votes={3}) for i in range(5)]
        lex = build_lexicon(recs, {"u1": PACoordinate(0.5, -0.2)})
        assert [e.id for e in lex] == [3]
        assert lex[3].coord == PACoordinate(0.5, -0.2)

    def test_below_threshold_omitted(self):
        recs = [_rec("u1", f"a{i}", votes={3} if i < 2 else {4}) for i in range(5)]
        lex = build_lexicon(recs, {"u1": PACoordinate(0, 0)})
        assert [e.id for e in lex] == [4]

    def test_no_agreement(self):
        recs = [_rec("u1", f"a{i}", votes={i}) for i in range(5)]
        with pytest.raises(ValueError, match="empty lexicon"):
            build_lexicon(recs, {"u1": PACoordinate(0, 0)})

    def test_recount_oracle(self):
        anchors = {e.id: e.coord for e in default_lexicon()}
        recs, labels = synth_annotations(anchors, seed=11)
        for threshold in (3, 4, 5):
            lex = build_lexicon(recs, labels, threshold)
            expected = oracles.recount_lexicon(recs, labels, threshold)
            assert sorted(expected) == [e.id for e in lex]
            for e in lex:
                assert e.coord.as_tuple() == pytest.approx(expected[e.id], abs=1e-12)

    def test_info_names(self):
        recs = [_rec("u1", f"a{i}", votes={3}) for i in range(5)]
        lex = build_lexicon(recs, {"u1": PACoordinate(0, 0)}, adjective_info={3: ("calm", "flat")})
        assert lex[3].label == "calm" and lex[3].major_category == "flat"


class TestIO:
    def test_round_trip(self, tmp_path):
        anchors = {e.id: e.coord for e in default_lexicon()}
        recs, _ = synth_annotations(anchors, utterances_per_adjective=2, seed=0)
        save_annotations(recs, tmp_path / "a.jsonl")
        assert load_annotations(tmp_path / "a.jsonl") == recs

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "a.jsonl"
        path.write_text('{"utterance_id": "u", "annotator_id": "a", "response": [0, 0, 9, 0], "adjective_votes": []}\n')
        with pytest.raises(ValueError, match=":1:"):
            load_annotations(path)
