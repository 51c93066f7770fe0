"""
Tests des entrées/sorties TSV
"""

import json

import numpy as np
import pandas as pd
import pytest

from robust_ebayes.dataio import (
    TOP_TABLE_COLUMNS, atomic_write_text, format_value, json_safe, read_design, read_expression,
    render_frame, render_json, render_top_table, write_outputs, write_top_table,
)
from robust_ebayes.ebayes import TopTableRow
from robust_ebayes.exceptions import DataError

EXPR = "gene_id\tA1\tA2\tB1\tB2\n" \
       "g1\t1.0\t2.0\t3.0\t4.0\n" \
       "g2\t0.5\tNA\t0.7\t0.9\n" \
       "g3\t2\t2\t2\t2.5\n"

DESIGN = "sample\tIntercept\tGroup2\n" \
         "A1\t1\t0\n" \
         "A2\t1\t0\n" \
         "B1\t1\t1\n" \
         "B2\t1\t1\n"


@pytest.fixture
def expr_file(tmp_path):
    path = tmp_path / "expr.tsv"
    path.write_text(EXPR)
    return path


class TestReadExpression:
    def test_reads_values_and_ids(self, expr_file):
        data = read_expression(expr_file)
        assert data.gene_ids == ('g1', 'g2', 'g3')
        assert data.sample_ids == ('A1', 'A2', 'B1', 'B2')
        assert np.isnan(data.values[1, 1])
        assert data.values[2, 3] == 2.5
        assert data.weights is None

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text(EXPR.replace("0.7", "abc"))
        with pytest.raises(DataError) as info:
            read_expression(path)
        assert info.value.line == 3
        assert info.value.column == 4
        assert "ligne 3" in str(info.value)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.tsv"
        path.write_text(EXPR + "g4\t1\t2\t3\t4\t5\n")
        with pytest.raises(DataError):
            read_expression(path)

    def test_duplicated_gene(self, tmp_path):
        path = tmp_path / "dup.tsv"
        path.write_text(EXPR.replace("g3", "g1"))
        with pytest.raises(DataError) as info:
            read_expression(path)
        assert info.value.line == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="introuvable"):
            read_expression(tmp_path / "absent.tsv")

    def test_header_only(self, tmp_path):
        path = tmp_path / "header.tsv"
        path.write_text("gene_id\tA1\tA2\n")
        with pytest.raises(DataError):
            read_expression(path)

    def test_weights(self, tmp_path, expr_file):
        weights = tmp_path / "weights.tsv"
        weights.write_text(EXPR.replace("NA", "0").replace("2.5", "1"))
        data = read_expression(expr_file, weights)
        assert data.weights.shape == (3, 4)
        assert data.weights[1, 1] == 0.0

    def test_negative_weight(self, tmp_path, expr_file):
        weights = tmp_path / "weights.tsv"
        weights.write_text(EXPR.replace("NA", "-1"))
        with pytest.raises(DataError) as info:
            read_expression(expr_file, weights)
        assert (info.value.line, info.value.column) == (3, 3)

    def test_weights_shape_mismatch(self, tmp_path, expr_file):
        weights = tmp_path / "weights.tsv"
        weights.write_text("gene_id\tA1\tA2\ng1\t1\t1\n")
        with pytest.raises(DataError):
            read_expression(expr_file, weights)

    def test_weights_must_not_be_missing(self, tmp_path, expr_file):
        weights = tmp_path / "weights.tsv"
        weights.write_text(EXPR)
        with pytest.raises(DataError):
            read_expression(expr_file, weights)


class TestReadDesign:
    def test_reads_design(self, tmp_path):
        path = tmp_path / "design.tsv"
        path.write_text(DESIGN)
        design = read_design(path, 4, ('A1', 'A2', 'B1', 'B2'))
        assert design.column_names == ('Intercept', 'Group2')
        np.testing.assert_array_equal(design.X[:, 1], [0, 0, 1, 1])

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "design.tsv"
        path.write_text(DESIGN)
        with pytest.raises(DataError):
            read_design(path, 5)

    def test_rank_deficient(self, tmp_path):
        path = tmp_path / "design.tsv"
        path.write_text(DESIGN.replace("\t1\n", "\t0\n").replace("\t1\t1", "\t1\t0"))
        with pytest.raises(DataError, match="rang"):
            read_design(path, 4)


class TestRendering:
    @pytest.mark.parametrize("value, expected", [
        (None, "NA"), (np.nan, "NA"), (np.inf, "Inf"), (-np.inf, "-Inf"),
        (0.123456789, "0.123457"), (1234567.0, "1.23457e+06"), (4, "4"), ("g1", "g1"),
    ])
    def test_format_value(self, value, expected):
        assert format_value(value) == expected

    def test_top_table_layout(self):
        rows = [TopTableRow('g1', 1.5, 7.25, 3.0, 0.001, 0.01, 10.0, 0.2, 6.0),
                TopTableRow('g2', np.nan, 2.0, np.nan, np.nan, np.nan, 4.0, 0.3, np.inf)]
        text = render_top_table(rows)
        lines = text.split("\n")
        assert lines[0].split("\t") == list(TOP_TABLE_COLUMNS)
        assert lines[1] == "g1\t1.5\t7.25\t3\t0.001\t0.01\t10\t6\t0.2"
        assert lines[2].startswith("g2\tNA\t2\tNA\tNA\tNA\t4\tInf")
        assert text.endswith("\n") and not text.endswith("\n\n")

    def test_f_table_layout(self):
        rows = [TopTableRow('g1', np.nan, 7.0, np.nan, 0.5, 0.5, 10.0, 0.2, 6.0, F=1.25)]
        header = render_top_table(rows).split("\n")[0].split("\t")
        assert 'F' in header and 'logFC' not in header

    def test_empty_table_has_header(self):
        assert render_top_table([]) == "\t".join(TOP_TABLE_COLUMNS) + "\n"

    def test_render_frame(self):
        frame = pd.DataFrame({'method': ['standard'], 'rate': [0.0500812345], 'se': [np.nan]})
        assert render_frame(frame) == "method\trate\tse\nstandard\t0.0500812\tNA\n"

    def test_json_safe(self):
        data = json_safe({'d0': np.inf, 'x': np.float64(0.5), 'n': np.int64(3), 'v': np.array([np.nan, 1.0])})
        assert data == {'d0': 'Inf', 'x': 0.5, 'n': 3, 'v': [None, 1.0]}
        assert json.loads(render_json({'a': np.nan})) == {'a': None}


class TestWriting:
    def test_atomic_write_leaves_no_temporary(self, tmp_path):
        target = tmp_path / "sub" / "out.txt"
        atomic_write_text(target, "contenu\n")
        assert target.read_text() == "contenu\n"
        assert [p.name for p in target.parent.iterdir()] == ["out.txt"]

    def test_write_outputs(self, tmp_path):
        written = write_outputs(tmp_path, {'a.tsv': "x\n", 'b.json': "{}\n"})
        assert set(written) == {'a.tsv', 'b.json'}
        assert (tmp_path / 'b.json').read_text() == "{}\n"

    def test_write_top_table(self, tmp_path):
        rows = [TopTableRow('g1', 1.0, 2.0, 3.0, 0.1, 0.2, 5.0, 0.5, 1.0)]
        path = write_top_table(rows, tmp_path / "toptable.tsv")
        assert path.read_text().count("\n") == 2
