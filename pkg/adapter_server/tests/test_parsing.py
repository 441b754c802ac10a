import math

import pytest

from adapter_server.parsing import geometric_mean, parse_answer_list, parse_judge_selection


class TestGeometricMean:
    def test_all_ones_is_one(self):
        assert geometric_mean([1.0, 1.0, 1.0]) == 1.0

    def test_empty_is_zero(self):
        assert geometric_mean([]) == 0.0

    def test_matches_closed_form(self):
        assert geometric_mean([0.5, 0.5]) == pytest.approx(0.5)
        assert geometric_mean([0.9, 0.4]) == pytest.approx(math.sqrt(0.36))

    def test_bounded(self):
        assert 0.0 <= geometric_mean([1e-30, 1.0]) <= 1.0


class TestAnswerListParsing:
    def test_json_array(self):
        assert parse_answer_list('["Paris", "Lyon"]') == ["Paris", "Lyon"]

    def test_bullet_lines(self):
        assert parse_answer_list("- Paris\n- Lyon") == ["Paris", "Lyon"]

    def test_numbered_lines(self):
        assert parse_answer_list("1. Paris\n2) Lyon") == ["Paris", "Lyon"]

    def test_comma_line(self):
        assert parse_answer_list("Paris, Lyon") == ["Paris", "Lyon"]

    def test_plain_text_is_unparseable(self):
        assert parse_answer_list("the answer might be paris") == []

    def test_empty(self):
        assert parse_answer_list("  \n ") == []


class TestJudgeParsing:
    def test_one_indexed_mapping(self):
        assert parse_judge_selection("1, 3", 4) == ([0, 2], False)

    def test_none_is_valid_empty(self):
        assert parse_judge_selection("None of these.", 4) == ([], False)

    def test_garbage_flags_unparseable(self):
        assert parse_judge_selection("hmm unclear", 4) == ([], True)

    def test_out_of_range_dropped(self):
        assert parse_judge_selection("0, 2, 9", 3) == ([1], False)

    def test_duplicates_collapsed_sorted(self):
        selected, flag = parse_judge_selection("3 and 1 and 3", 4)
        assert selected == [0, 2]
        assert not flag
