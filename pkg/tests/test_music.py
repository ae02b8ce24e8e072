# tests/test_music.py
import numpy as np
import pytest

from core.exceptions import ConfigurationError
from core.models import SicParams, SimilarityMatrix, SynthConfig, TechniqueSet
from core.music import StreamingMusic, music_match, music_match_all, scaled_views, selection_counts, trace_frame
from core.scaling import zscore_rows
from core.sic import sic_match
from core.synth import generate, oracle_music


def _random_set(rng, count=3, shape=(30, 30)):
    return TechniqueSet(tuple((f"t{i}", SimilarityMatrix(rng.normal(size=shape))) for i in range(count)))


class TestMusicMatch:
    def test_hand_built_pair(self):
        a = SimilarityMatrix([[0.0, 0.0, 0.0, 0.0], [0.7, 0.1, 0.6, 0.2], [0.1, 0.9, 0.2, 0.8]])
        b4 = SimilarityMatrix([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
        techniques = TechniqueSet((("a", a), ("b", b4)))
        decision = music_match(techniques, 2, SicParams(k=2, f=1, w=0), scale=False)
        assert decision.technique_id == "b"
        assert decision.match_index == 3
        assert decision.theta == pytest.approx(2.0)

    def test_single_technique_equals_sic(self, rng):
        matrix = SimilarityMatrix(rng.normal(size=(25, 40)))
        params = SicParams(k=10, f=4, w=1)
        techniques = TechniqueSet((("only", matrix),))
        scaled = zscore_rows(matrix)
        decisions, trace = music_match_all(techniques, params)
        for q, decision in enumerate(decisions):
            expected = sic_match(scaled, q, params)
            assert decision.match_index == expected.match_index
            assert decision.theta == expected.theta
        assert {tid for _, tid in trace} == {"only"}

    def test_identical_techniques_pick_first(self, rng):
        matrix = SimilarityMatrix(rng.normal(size=(15, 20)))
        decisions, _ = music_match_all(TechniqueSet((("x", matrix), ("y", matrix))), SicParams(k=5, f=3, w=1))
        assert all(d.technique_id == "x" for d in decisions)

    def test_selection_dominance(self, rng):
        techniques = _random_set(rng)
        params = SicParams(k=8, f=4, w=1)
        views = scaled_views(techniques)
        for q in range(30):
            decision = music_match(techniques, q, params)
            assert decision.theta == max(sic_match(views[tid], q, params).theta for tid in techniques.ids)

    def test_oracle_equivalence(self, rng):
        for _ in range(20):
            techniques = _random_set(rng, count=int(rng.integers(1, 4)), shape=(12, int(rng.integers(2, 30))))
            n = techniques.shape[1]
            params = SicParams(k=n, f=int(rng.integers(0, 6)), w=int(rng.integers(0, 3)))
            for q in range(12):
                decision = music_match(techniques, q, params)
                expected = oracle_music(techniques, q, params)
                assert (decision.technique_id, decision.match_index) == (expected.technique_id, expected.match_index)
                assert abs(decision.theta - expected.theta) <= 1e-12

    def test_scale_invariance(self, rng):
        params = SicParams(k=10, f=4, w=1)
        for _ in range(50):
            techniques = _random_set(rng, count=3, shape=(20, 25))
            target = int(rng.integers(0, 3))
            a, b = rng.uniform(0.1, 10.0), rng.uniform(-50.0, 50.0)
            transformed = TechniqueSet(tuple(
                (tid, SimilarityMatrix(a * m.values + b) if i == target else m)
                for i, (tid, m) in enumerate(techniques.techniques)
            ))
            before, _ = music_match_all(techniques, params)
            after, _ = music_match_all(transformed, params)
            assert [(d.technique_id, d.match_index) for d in before] == \
                   [(d.technique_id, d.match_index) for d in after]

    def test_order_swap_keeps_untied_decisions(self, rng):
        techniques = _random_set(rng)
        reversed_set = TechniqueSet(tuple(reversed(techniques.techniques)))
        params = SicParams(k=8, f=4, w=1)
        forward, _ = music_match_all(techniques, params)
        backward, _ = music_match_all(reversed_set, params)
        for f, b in zip(forward, backward):
            assert (f.technique_id, f.match_index, f.theta) == (b.technique_id, b.match_index, b.theta)

    def test_perfect_technique_wins_over_noise(self):
        params = SicParams(k=20, f=10, w=1)
        for seed in range(20):
            clean, _ = generate(SynthConfig(q_count=60, n_count=60, noise_sigma=0.0, seed=seed))
            noise, _ = generate(SynthConfig(q_count=60, n_count=60, dropout=1.0, seed=seed + 100))
            _, trace = music_match_all(TechniqueSet((("clean", clean), ("noise", noise))), params)
            late = [tid for q, tid in trace if q >= params.f]
            assert late.count("clean") / len(late) >= 0.95

    def test_score_confidence(self, rng):
        techniques = _random_set(rng, count=2)
        views = scaled_views(techniques)
        decision = music_match(techniques, 10, SicParams(k=5, f=3, w=1), confidence="score")
        assert decision.confidence == views[decision.technique_id].values[10, decision.match_index]

    def test_empty_set(self):
        with pytest.raises(ConfigurationError):
            music_match(TechniqueSet(()), 0, SicParams())

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            TechniqueSet((("a", SimilarityMatrix(np.zeros((2, 3)))), ("b", SimilarityMatrix(np.zeros((2, 4))))))

    def test_distance_orientation_rejected(self):
        with pytest.raises(ConfigurationError):
            TechniqueSet((("a", SimilarityMatrix(np.zeros((2, 3)), "distance")),))


def test_selection_counts_and_trace_frame():
    trace = [(0, "a"), (1, "b"), (2, "a"), (3, "a")]
    assert selection_counts(trace, ["a", "b", "c"]) == {"a": 0.75, "b": 0.25, "c": 0.0}
    frame = trace_frame(trace)
    assert list(frame.columns) == ["query_index", "technique_id"]
    assert frame["technique_id"].tolist() == ["a", "b", "a", "a"]


def test_streaming_equals_batch(rng):
    techniques = _random_set(rng, count=3, shape=(35, 20))
    params = SicParams(k=6, f=5, w=1)
    batch, _ = music_match_all(techniques, params)
    stream = StreamingMusic(techniques.ids, params)
    for q in range(35):
        decision = stream.push({tid: techniques.matrix(tid).values[q] for tid in techniques.ids})
        assert decision == batch[q]
