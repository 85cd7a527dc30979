import numpy as np
import pytest

from tradeplots import ResultsTable, parse_results, write_results
from tradeplots.io import HEADER, SchemaError


def sample_file(tmp_path, body):
    path = tmp_path / "res.csv"
    path.write_text(HEADER + "\n" + body, encoding="utf-8")
    return path


class TestParse:
    def test_reads_rows(self, tmp_path):
        path = sample_file(tmp_path, "1,0.5,0.1,3\n2,0.7,0.2,3\n")
        table = parse_results(path)
        assert len(table) == 2
        assert table.t.tolist() == [1, 2]
        assert table.mean_cum_regret.tolist() == [0.5, 0.7]

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "res.csv"
        path.write_text("time,regret\n1,2\n")
        with pytest.raises(SchemaError, match=":1:"):
            parse_results(path)

    def test_reports_line_number_for_bad_row(self, tmp_path):
        path = sample_file(tmp_path, "1,0.5,0.1,3\n2,oops,0.2,3\n")
        with pytest.raises(SchemaError, match=":3:"):
            parse_results(path)

    def test_rejects_wrong_column_count(self, tmp_path):
        path = sample_file(tmp_path, "1,0.5,0.1\n")
        with pytest.raises(SchemaError, match="4 columns"):
            parse_results(path)

    def test_rejects_non_increasing_rounds(self, tmp_path):
        path = sample_file(tmp_path, "2,0.5,0.1,3\n2,0.6,0.1,3\n")
        with pytest.raises(SchemaError, match="does not increase"):
            parse_results(path)

    def test_rejects_negative_regret(self, tmp_path):
        path = sample_file(tmp_path, "1,-0.5,0.1,3\n")
        with pytest.raises(SchemaError, match="negative"):
            parse_results(path)

    def test_rejects_empty(self, tmp_path):
        path = sample_file(tmp_path, "")
        with pytest.raises(SchemaError, match="no data rows"):
            parse_results(path)


class TestRoundTrip:
    def test_write_parse_write_is_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        table = ResultsTable(
            t=np.arange(1, 101),
            mean_cum_regret=np.cumsum(rng.random(100)),
            ci_halfwidth=rng.random(100),
            n_reps=np.full(100, 7),
        )
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        write_results(table, first)
        write_results(parse_results(first), second)
        assert first.read_bytes() == second.read_bytes()


class TestInvariants:
    def test_table_validates_rounds(self):
        with pytest.raises(ValueError):
            ResultsTable(np.array([2, 1]), np.array([0.1, 0.2]),
                         np.zeros(2), np.ones(2, dtype=int))

    def test_table_validates_sign(self):
        with pytest.raises(ValueError):
            ResultsTable(np.array([1, 2]), np.array([0.1, -0.2]),
                         np.zeros(2), np.ones(2, dtype=int))

    def test_tail_window(self):
        table = ResultsTable(np.arange(1, 11), np.arange(1.0, 11.0),
                             np.zeros(10), np.ones(10, dtype=int))
        tail = table.tail(3)
        assert tail.t.tolist() == [8, 9, 10]
