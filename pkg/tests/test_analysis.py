import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teachstyle import analysis
from teachstyle.analysis import (
    AttentionCategory,
    GazeFrame,
    StudentGaze,
    attention_report,
    attention_scores,
    categorize_attention,
    estimate_teacher_position,
    line_intersections,
    segment_course,
    synth_gaze_scene,
    teacher_style,
    trimmed_mean,
)
from teachstyle.core import PACoordinate, centroid, default_lexicon

from . import oracles

I, II, III = AttentionCategory.I, AttentionCategory.II, AttentionCategory.III


def _frame(rows):
    return GazeFrame(tuple(StudentGaze(f"s{i}", *r) for i, r in enumerate(rows)))


class TestStyles:
    def test_all_at_one_adjective(self):
        lex = default_lexicon()
        c, top = teacher_style([lex[12].coord] * 4, lex)
        assert top[0][0].id == 12 and top[0][1] == 0.0

    def test_symmetric_pair(self):
        lex = default_lexicon()
        c, top = teacher_style([PACoordinate(-1, 0.5), PACoordinate(1, 0.5)], lex)
        assert c == PACoordinate(0.0, 0.5)
        assert [e.id for e, _ in top] == oracles.nearest_scan((0.0, 0.5), lex.entries, 3)

    def test_composed_oracle(self):
        lex = default_lexicon()
        rng = np.random.default_rng(0)
        for _ in range(50):
            pts = [PACoordinate(*p) for p in rng.normal(size=(int(rng.integers(1, 20)), 2))]
            _, top = teacher_style(pts, lex)
            mp = (oracles.mean(p.pleasure for p in pts), oracles.mean(p.arousal for p in pts))
            assert [e.id for e, _ in top] == oracles.nearest_scan(mp, lex.entries, 3)

    def test_duplicating_predictions(self):
        lex = default_lexicon()
        pts = [PACoordinate(*p) for p in np.random.default_rng(1).normal(size=(7, 2))]
        assert [e.id for e, _ in teacher_style(pts, lex)[1]] == [e.id for e, _ in teacher_style(pts * 2, lex)[1]]

    def test_empty(self):
        with pytest.raises(ValueError):
            teacher_style([], default_lexicon())

    def test_summary_json_shape(self):
        out = analysis.group_styles(["t1", "t2", "t1"], [PACoordinate(0, 0)] * 3, default_lexicon())
        assert sorted(out) == ["t1", "t2"]
        assert set(out["t1"]) == {"centroid", "top3"} and len(out["t1"]["top3"]) == 3


class TestSegments:
    def test_uniform(self):
        ids = [f"u{i}" for i in range(10)]
        segs = segment_course(ids, list(range(10)), [PACoordinate(i, 0) for i in range(10)], start=0, end=10)
        assert [len(s.members) for s in segs] == [2] * 5

    def test_all_in_first_fifth(self):
        segs = segment_course(["a", "b"], [0.0, 1.0], [PACoordinate(0, 0)] * 2, start=0, end=100)
        assert len(segs[0].members) == 2 and all(s.centroid is None for s in segs[1:])

    def test_end_point_kept(self):
        segs = segment_course(["a", "b"], [0.0, 10.0], [PACoordinate(0, 0)] * 2)
        assert segs[-1].members == ["b"]

    def test_interval_oracle(self):
        rng = np.random.default_rng(0)
        t = rng.uniform(0, 60, size=200).tolist() + [0.0, 12.0, 60.0]
        ids = [f"u{i}" for i in range(len(t))]
        segs = segment_course(ids, t, [PACoordinate(0, 0)] * len(t), 5, 0.0, 60.0)
        for s in segs:
            last = s.index == 4
            expected = [i for i, ti in zip(ids, t) if s.start <= ti < s.stop or (last and ti == s.stop)]
            assert s.members == expected

    def test_missing_time(self):
        with pytest.raises(ValueError, match="timestamps"):
            segment_course(["a"], [None], [PACoordinate(0, 0)])


class TestGeometry:
    def test_two_lines(self):
        f = _frame([(0, 0, 1, 1), (2, 0, -1, 1)])
        np.testing.assert_allclose(line_intersections(f.positions, f.directions), [[1.0, 1.0]])
        assert estimate_teacher_position(f) == pytest.approx((1.0, 1.0), abs=1e-15)

    def test_parallel_only(self):
        with pytest.raises(ValueError, match="no intersections"):
            estimate_teacher_position(_frame([(0, 0, 1, 0), (0, 1, 2, 0)]))

    def test_intersections_oracle(self):
        rng = np.random.default_rng(0)
        pos, d = rng.normal(size=(9, 2)), rng.normal(size=(9, 2))
        got = line_intersections(pos, d)
        np.testing.assert_allclose(got, oracles.intersections(pos, d), atol=1e-9)

    def test_planted_point(self):
        rng = np.random.default_rng(42)
        frame = synth_gaze_scene(12, (3.0, 1.5), 0.05, rng)
        est = estimate_teacher_position(frame)
        assert math.dist(est, (3.0, 1.5)) < 0.2

    def test_translation_equivariance(self):
        rng = np.random.default_rng(1)
        frame = synth_gaze_scene(10, (0.0, 0.0), 0.05, rng)
        shift = (0.5, -0.25)
        moved = GazeFrame(tuple(StudentGaze(s.student_id, s.x + shift[0], s.y + shift[1], s.dx, s.dy)
                                for s in frame.students))
        a, b = estimate_teacher_position(frame), estimate_teacher_position(moved)
        assert b[0] - a[0] == pytest.approx(shift[0], abs=1e-12)
        assert b[1] - a[1] == pytest.approx(shift[1], abs=1e-12)

    def test_trimmed_mean(self):
        rng = np.random.default_rng(2)
        for n in range(1, 40):
            x = rng.normal(size=n)
            assert trimmed_mean(x) == pytest.approx(oracles.trimmed_mean(x.tolist()), abs=1e-12)
        assert trimmed_mean([100.0, 1.0, 2.0, 3.0, -50.0, 2.5, 1.5, 2.2]) == pytest.approx((1.5 + 2.0 + 2.2 + 2.5) / 4)


class TestScores:
    def test_incidence(self):
        assert attention_scores(_frame([(0, 0, 1, 1)]), (3.0, 3.0))[0] == pytest.approx(0.0, abs=1e-15)

    def test_axis_aligned(self):
        assert attention_scores(_frame([(0, 0, 1, 0)]), (5.0, 2.0))[0] == 2.0

    def test_formula_oracle(self):
        rng = np.random.default_rng(3)
        rows = np.column_stack([rng.normal(size=(30, 2)), rng.normal(size=(30, 2))])
        t = (0.7, -1.2)
        got = attention_scores(_frame(rows.tolist()), t)
        for g, r in zip(got, rows):
            assert abs(g - oracles.point_line_distance(t, r[:2], r[2:])) < 1e-12

    @given(st.floats(0.01, 100) | st.floats(-100, -0.01))
    @settings(max_examples=50, deadline=None)
    def test_direction_scale_invariant(self, k):
        rows = [(0.3, 0.1, 1.0, 2.0), (-1.0, 0.5, -0.4, 0.3)]
        scaled = [(x, y, k * dx, k * dy) for x, y, dx, dy in rows]
        np.testing.assert_allclose(attention_scores(_frame(scaled), (1, 1)), attention_scores(_frame(rows), (1, 1)),
                                   rtol=1e-12)

    def test_zero_direction(self):
        with pytest.raises(ValueError, match="s1"):
            attention_scores(_frame([(0, 0, 1, 0), (1, 1, 0, 0)]), (0, 0))


class TestCategories:
    def test_uniform(self):
        assert categorize_attention([1, 1, 1, 1]) == [III] * 4

    def test_hand_thresholds(self):
        assert categorize_attention([0.1, 1, 1, 10]) == [II, II, II, I]

    def test_literal_swaps(self):
        d = [0.1, 1, 1, 10, 2.0]
        swap = {I: II, II: I, III: III}
        assert categorize_attention(d, "literal") == [swap[c] for c in categorize_attention(d)]

    def test_empty(self):
        with pytest.raises(ValueError):
            categorize_attention([])

    def test_bad_polarity(self):
        with pytest.raises(ValueError):
            categorize_attention([1.0], "sideways")


class TestReport:
    def test_window_average(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = [synth_gaze_scene(8, (0.0, 0.0), 0.05, rng) for _ in range(3)]
        path = tmp_path / "g.jsonl"
        path.write_text("".join(json.dumps([vars(s) for s in f.students]) + "\n" for f in frames))
        loaded = analysis.load_gaze(path)
        rows = attention_report(loaded)
        assert [r["student_id"] for r in rows] == sorted(s.student_id for s in frames[0].students)
        for r in rows:
            per_frame = []
            for f in loaded:
                t = estimate_teacher_position(f)
                idx = [s.student_id for s in f.students].index(r["student_id"])
                per_frame.append(attention_scores(f, t)[idx])
            assert r["mean_distance"] == pytest.approx(np.mean(per_frame), abs=1e-12)

    def test_bad_gaze_line(self, tmp_path):
        path = tmp_path / "g.jsonl"
        path.write_text('[{"student_id": "a", "x": 0}]\n')
        with pytest.raises(ValueError, match=":1:"):
            analysis.load_gaze(path)
