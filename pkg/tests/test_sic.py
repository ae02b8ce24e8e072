# tests/test_sic.py
import numpy as np
import pytest
from numpy.testing import assert_array_equal

from core.exceptions import ConfigurationError, FormatError
from core.models import SicParams, SimilarityMatrix
from core.scaling import zscore_rows
from core.sic import StreamingSic, sic_match, sic_match_all, theta, theta_table_frame, top_k_candidates
from core.synth import oracle_sic


class TestTopK:
    def test_direct_inspection(self):
        assert_array_equal(top_k_candidates(np.array([0.1, 0.9, 0.2, 0.8]), 2), [1, 3])

    def test_ties_prefer_lower_index(self):
        assert_array_equal(top_k_candidates(np.array([5.0, 5.0, 5.0]), 2), [0, 1])

    def test_tie_straddling_the_cut(self):
        assert_array_equal(top_k_candidates(np.array([1.0, 3.0, 2.0, 2.0, 2.0]), 3), [1, 2, 3])

    def test_k_larger_than_row(self):
        assert_array_equal(top_k_candidates(np.array([0.2, 0.4, 0.1]), 10), [1, 0, 2])

    def test_matches_full_sort(self, rng):
        row = rng.normal(size=10_000)
        expected = np.argsort(-row, kind="stable")[:200]
        assert_array_equal(top_k_candidates(row, 200), expected)


class TestTheta:
    def test_hand_example(self, hand_matrix):
        params = SicParams(k=4, f=1, w=0)
        assert theta(hand_matrix, 2, 1, params) == pytest.approx(1.6, abs=1e-12)
        assert theta(hand_matrix, 2, 3, params) == pytest.approx(1.4, abs=1e-12)

    def test_single_term_is_window_max(self, rng):
        matrix = SimilarityMatrix(rng.normal(size=(5, 12)))
        for w in range(3):
            params = SicParams(k=12, f=0, w=w)
            for k in range(12):
                lo, hi = max(0, k - w), min(11, k + w)
                assert theta(matrix, 3, k, params) == matrix.values[3, lo:hi + 1].max()

    def test_first_query_truncates_history(self, rng):
        matrix = SimilarityMatrix(rng.normal(size=(4, 6)))
        assert theta(matrix, 0, 2, SicParams(k=6, f=20, w=0)) == matrix.values[0, 2]

    def test_window_left_of_map_adds_zero(self):
        matrix = SimilarityMatrix([[5.0, 5.0, 5.0], [1.0, 2.0, 3.0]])
        # k=0 at f=1 looks at column -1 only
        assert theta(matrix, 1, 0, SicParams(k=3, f=1, w=0)) == 1.0

    def test_bad_indices(self, hand_matrix, hand_params):
        with pytest.raises(ConfigurationError):
            theta(hand_matrix, 3, 0, hand_params)
        with pytest.raises(ConfigurationError):
            theta(hand_matrix, 0, 4, hand_params)


class TestSicMatch:
    def test_hand_example(self, hand_matrix, hand_params):
        result = sic_match(hand_matrix, 2, hand_params)
        assert result.match_index == 1
        assert result.theta == pytest.approx(1.6, abs=1e-12)
        assert_array_equal(result.candidate_indices, [1, 3])
        assert result.reads == 4

    def test_oracle_equivalence(self, rng):
        for _ in range(200):
            q_count, n_count = rng.integers(1, 65, size=2)
            params = SicParams(k=int(n_count), f=int(rng.integers(0, 9)), w=int(rng.integers(0, 4)))
            matrix = SimilarityMatrix(rng.normal(size=(q_count, n_count)))
            q = int(rng.integers(0, q_count))
            result = sic_match(matrix, q, params)
            expected = oracle_sic(matrix, q, params)
            assert result.match_index == expected.match_index
            assert abs(result.theta - expected.theta) <= 1e-12

    def test_degenerate_parameters_give_argmax(self, rng):
        for _ in range(100):
            matrix = SimilarityMatrix(rng.normal(size=(8, int(rng.integers(1, 40)))))
            params = SicParams(k=matrix.cols, f=0, w=0)
            for q in range(matrix.rows):
                assert sic_match(matrix, q, params).match_index == int(np.argmax(matrix.values[q]))

    def test_strong_diagonal(self):
        matrix = zscore_rows(SimilarityMatrix(np.eye(30)))
        results = sic_match_all(matrix, SicParams(k=30, f=5, w=0))
        assert [r.match_index for r in results] == list(range(30))

    def test_constant_matrix_picks_lowest_index(self):
        results = sic_match_all(zscore_rows(SimilarityMatrix(np.ones((6, 9)))), SicParams(k=4, f=3, w=1))
        assert all(r.match_index == 0 for r in results)

    def test_reads_are_bounded_by_k_f_w(self, rng):
        params = SicParams(k=20, f=6, w=2)
        matrix = SimilarityMatrix(rng.normal(size=(30, 5000)))
        for result in sic_match_all(matrix, params)[10:]:
            assert result.reads <= params.k * (params.f + 1) * (2 * params.w + 1)


def test_theta_table_frame(hand_matrix, hand_params):
    table = theta_table_frame(sic_match_all(hand_matrix, hand_params))
    assert list(table.columns) == ["query_index", "candidate_0", "candidate_1"]
    assert table.shape == (3, 3)
    assert table.loc[2, "candidate_0"].startswith("1:")


class TestStreaming:
    def test_streaming_equals_batch(self, rng):
        raw = SimilarityMatrix(rng.normal(size=(40, 25)))
        params = SicParams(k=8, f=5, w=1)
        batch = sic_match_all(zscore_rows(raw), params)
        stream = StreamingSic(params)
        for q, row in enumerate(raw.values):
            result = stream.push(row)
            assert result.query == q
            assert result.match_index == batch[q].match_index
            assert result.theta == batch[q].theta
            assert stream.resident_rows <= params.f + 1

    def test_unscaled_stream(self, hand_matrix, hand_params):
        stream = StreamingSic(hand_params, scale=False)
        results = [stream.push(row) for row in hand_matrix.values]
        assert results[2].match_index == 1

    def test_row_length_change(self):
        stream = StreamingSic(SicParams(k=2, f=1, w=0))
        stream.push(np.array([1.0, 2.0, 3.0]))
        with pytest.raises(FormatError):
            stream.push(np.array([1.0, 2.0]))


class TestThetaProperties:
    def test_window_nesting_on_non_negative_scores(self, rng):
        matrix = SimilarityMatrix(rng.uniform(size=(12, 30)))
        for q in (0, 4, 11):
            for k in range(30):
                thetas = [theta(matrix, q, k, SicParams(k=30, f=5, w=w)) for w in range(5)]
                assert thetas == sorted(thetas)

    def test_window_nesting_away_from_left_edge(self, rng):
        # empty slices add 0, so signed rows need every window inside the map
        matrix = SimilarityMatrix(rng.normal(size=(12, 30)))
        f = 5
        for q in (3, 11):
            for k in range(f, 30):
                thetas = [theta(matrix, q, k, SicParams(k=30, f=f, w=w)) for w in range(5)]
                assert thetas == sorted(thetas)

    def test_more_candidates_never_lower_theta(self, rng):
        matrix = zscore_rows(SimilarityMatrix(rng.normal(size=(20, 40))))
        for q in range(20):
            thetas = [sic_match(matrix, q, SicParams(k=k, f=4, w=1)).theta for k in (1, 5, 10, 25, 40)]
            assert all(later >= earlier - 1e-12 for earlier, later in zip(thetas, thetas[1:]))
            exhaustive = max(theta(matrix, q, k, SicParams(k=40, f=4, w=1)) for k in range(40))
            assert thetas[-1] == pytest.approx(exhaustive, abs=1e-12)

    def test_rows_before_history_are_irrelevant(self, rng):
        params = SicParams(k=10, f=4, w=1)
        values = rng.normal(size=(25, 30))
        for q in range(params.f, 25):
            altered = values.copy()
            altered[:q - params.f] = rng.normal(scale=50.0, size=(q - params.f, 30))
            before = sic_match(SimilarityMatrix(values), q, params)
            after = sic_match(SimilarityMatrix(altered), q, params)
            assert (after.match_index, after.theta) == (before.match_index, before.theta)
            assert_array_equal(after.candidate_indices, before.candidate_indices)
