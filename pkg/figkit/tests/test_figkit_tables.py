import numpy as np
import pytest

from figkit.tables import FigureInputError, read_table


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_read_table_preserves_cell_strings(tmp_path):
    p = write(tmp_path, "a,b\n0.10,x\n1e-3,y\n")
    t = read_table(p)
    assert t.columns == ("a", "b")
    assert t.strings("a") == ["0.10", "1e-3"]  # raw, not reformatted
    assert np.array_equal(t.floats("a"), [0.1, 0.001])


def test_read_table_missing_file(tmp_path):
    with pytest.raises(FigureInputError, match="missing input CSV"):
        read_table(tmp_path / "nope.csv")


def test_read_table_empty_file(tmp_path):
    with pytest.raises(FigureInputError, match="empty"):
        read_table(write(tmp_path, ""))


def test_read_table_header_only(tmp_path):
    with pytest.raises(FigureInputError, match="no data rows"):
        read_table(write(tmp_path, "a,b\n"))


def test_read_table_ragged_row(tmp_path):
    with pytest.raises(FigureInputError, match="line 3"):
        read_table(write(tmp_path, "a,b\n1,2\n1,2,3\n"))


def test_required_column_named_in_error(tmp_path):
    p = write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(FigureInputError, match="'importance'"):
        read_table(p, required=("a", "importance"))


def test_floats_error_names_column_and_row(tmp_path):
    t = read_table(write(tmp_path, "a,b\n1,2\nx,3\n"))
    with pytest.raises(FigureInputError, match="column 'a' row 2"):
        t.floats("a")


def test_nan_cells_parse(tmp_path):
    t = read_table(write(tmp_path, "a\nnan\n1.5\n"))
    vals = t.floats("a")
    assert np.isnan(vals[0]) and vals[1] == 1.5


def test_write_round_trips_bytes(tmp_path):
    text = "a,b\n0.10,x\n1e-3,nan\n"
    t = read_table(write(tmp_path, text))
    out = tmp_path / "copy.csv"
    t.write(out)
    assert out.read_text() == text


def test_matrix_happy_path(tmp_path):
    t = read_table(write(tmp_path, "metric,p,q\np,1.0,0.5\nq,0.5,1.0\n"))
    labels, values = t.matrix()
    assert labels == ("p", "q")
    assert np.array_equal(values, [[1.0, 0.5], [0.5, 1.0]])


def test_matrix_rejects_non_square(tmp_path):
    t = read_table(write(tmp_path, "metric,p,q\np,1.0,0.5\n"))
    with pytest.raises(FigureInputError, match="square"):
        t.matrix()


def test_matrix_rejects_label_mismatch(tmp_path):
    t = read_table(write(tmp_path, "metric,p,q\nq,1.0,0.5\np,0.5,1.0\n"))
    with pytest.raises(FigureInputError, match="labels"):
        t.matrix()
