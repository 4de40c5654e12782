import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tndsens import (EmptyRestriction, GeneralTable, InvalidInput, InvalidTable, SensitivityParams,
                     UndefinedOddsRatio, observed_or, read_strata_csv, read_strata_json, relabel_exposure,
                     restrict_table, validate_table, write_strata_csv)
from tndsens.core import format_value, parse_param

from .conftest import random_tables

positive_cells = st.lists(st.floats(1e-3, 1e3, allow_nan=False), min_size=4, max_size=4)


class TestValidate:
    def test_counts_normalize(self):
        t = validate_table((10, 20, 30, 40), as_counts=True)
        np.testing.assert_allclose(t.cells, (0.1, 0.2, 0.3, 0.4), atol=1e-15)
        assert t.n == 100
        assert t.counts == (10, 20, 30, 40)

    def test_probabilities_unchanged(self):
        t = validate_table((0.25, 0.25, 0.25, 0.25))
        np.testing.assert_array_equal(t.cells, 0.25)
        assert t.positive

    def test_zero_cell_keeps_table(self):
        t = validate_table((0, 5, 5, 5), as_counts=True)
        assert not t.positive

    @pytest.mark.parametrize("raw", [(0, 0, 0, 0), (1, -1, 1, 1), (1, 2, 3), (1, float("nan"), 1, 1)])
    def test_rejects(self, raw):
        with pytest.raises(InvalidTable):
            validate_table(raw)

    def test_rejects_fractional_counts(self):
        with pytest.raises(InvalidTable):
            validate_table((1.5, 2, 3, 4), as_counts=True)

    def test_cells_read_only(self):
        t = validate_table((1, 2, 3, 4))
        with pytest.raises(ValueError):
            t.cells[0] = 0.5

    @settings(max_examples=200, deadline=None)
    @given(positive_cells)
    def test_sum_and_idempotence(self, raw):
        t = validate_table(raw)
        assert abs(t.cells.sum() - 1) <= 1e-12
        assert validate_table(t) == t
        np.testing.assert_allclose(validate_table(t.cells).cells, t.cells, rtol=0, atol=1e-15)


class TestOddsRatio:
    @pytest.mark.parametrize("cells, expected", [
        ((0.25, 0.25, 0.25, 0.25), 1.0),
        ((0.1, 0.2, 0.3, 0.4), 0.04 / 0.06),
        ((0.4, 0.1, 0.1, 0.4), 16.0),
    ])
    def test_examples(self, cells, expected):
        assert observed_or(validate_table(cells)) == pytest.approx(expected, rel=1e-12)

    def test_zero_cell(self):
        with pytest.raises(UndefinedOddsRatio):
            observed_or(validate_table((0, 5, 5, 5), as_counts=True))


class TestRelabel:
    def test_swap(self, reference_table):
        np.testing.assert_allclose(relabel_exposure(reference_table).cells, (0.2, 0.1, 0.4, 0.3))

    def test_involution(self, reference_table):
        assert relabel_exposure(relabel_exposure(reference_table)) == reference_table

    def test_reciprocal(self, reference_table):
        assert observed_or(relabel_exposure(reference_table)) == pytest.approx(1.5, rel=1e-12)

    def test_reciprocal_random(self):
        for t in random_tables(1000, seed=1, floor=0):
            assert observed_or(relabel_exposure(t)) * observed_or(t) == pytest.approx(1.0, abs=1e-12)

    def test_counts_follow(self):
        t = validate_table((1, 2, 3, 4), as_counts=True)
        assert relabel_exposure(t).counts == (2, 1, 4, 3)


class TestRestrict:
    def test_identity_2x2(self):
        g = GeneralTable(np.array([[0.1, 0.3], [0.2, 0.4]]))
        t = restrict_table(g)
        np.testing.assert_allclose(t.cells, (0.1, 0.2, 0.3, 0.4), atol=1e-15)

    def test_uniform_3x3(self):
        g = GeneralTable(np.full((3, 3), 1 / 9))
        np.testing.assert_allclose(restrict_table(g, (0, 1), (0, 1)).cells, 0.25, atol=1e-15)

    def test_renormalize_3x2(self):
        cells = np.array([[0.05, 0.15], [0.10, 0.20], [0.25, 0.25]])
        t = restrict_table(GeneralTable(cells), (0, 1), (0, 1))
        np.testing.assert_allclose(t.cells, (0.1, 0.2, 0.3, 0.4), atol=1e-15)

    def test_other_levels(self):
        cells = np.array([[0.05, 0.15], [0.10, 0.20], [0.25, 0.25]])
        t = restrict_table(GeneralTable(cells), (2, 0), (0, 1))
        np.testing.assert_allclose(t.cells, np.array([0.25, 0.05, 0.25, 0.15]) / 0.7)

    def test_empty(self):
        cells = np.array([[0.0, 0.0], [0.0, 0.0], [0.5, 0.5]])
        with pytest.raises(EmptyRestriction):
            restrict_table(GeneralTable(cells), (0, 1), (0, 1))

    def test_bad_levels(self):
        g = GeneralTable(np.full((2, 2), 0.25))
        with pytest.raises(InvalidInput):
            restrict_table(g, (0, 0), (0, 1))
        with pytest.raises(InvalidInput):
            restrict_table(g, (0, 2), (0, 1))

    def test_general_table_sum(self):
        with pytest.raises(InvalidTable):
            GeneralTable(np.full((2, 2), 0.3))

    def test_counts_restriction(self):
        g = GeneralTable(np.array([[10, 30, 5], [20, 40, 5]]), is_counts=True)
        t = restrict_table(g)
        assert t.counts == (10, 20, 30, 40)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(1e-3, 1.0), min_size=9, max_size=9),
           st.sampled_from([(0, 1), (1, 2), (2, 0)]), st.sampled_from([(0, 1), (2, 1)]))
    def test_cross_ratio_preserved(self, raw, zp, yp):
        cells = np.array(raw).reshape(3, 3)
        cells = cells / cells.sum()
        g = GeneralTable(cells)
        (z0, z1), (y0, y1) = zp, yp
        cross = cells[z1, y1] * cells[z0, y0] / (cells[z1, y0] * cells[z0, y1])
        assert observed_or(restrict_table(g, zp, yp)) == pytest.approx(cross, rel=1e-12)


class TestParams:
    def test_defaults(self):
        p = SensitivityParams()
        assert p.delta == 0 and math.isinf(p.gamma) and math.isinf(p.xi)

    def test_strings(self):
        p = SensitivityParams("0.1", "inf", "Infinity")
        assert p.delta == 0.1 and math.isinf(p.gamma) and math.isinf(p.xi)
        assert p.as_dict() == {"delta": 0.1, "gamma": "inf", "xi": "inf"}

    @pytest.mark.parametrize("kw", [dict(delta=-0.1), dict(delta=1.1), dict(gamma=0.5), dict(xi=0.9),
                                    dict(gamma=float("nan"))])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInput):
            SensitivityParams(**kw)

    def test_parse_and_format(self):
        assert parse_param(" INF ") == math.inf
        assert parse_param("2.5") == 2.5
        assert format_value(math.inf) == "inf"
        assert format_value(-math.inf) == "-inf"
        assert format_value(None) is None


class TestFiles:
    CSV = "stratum,z,y,count\na,0,0,10\na,1,0,20\na,0,1,30\na,1,1,40\nb,1,1,4\nb,0,0,1\nb,0,1,3\nb,1,0,2\n"

    def test_csv_round_trip(self):
        tables = read_strata_csv(io.StringIO(self.CSV))
        assert list(tables) == ["a", "b"]
        assert tables["a"].counts == (10, 20, 30, 40)
        assert tables["b"].counts == (1, 2, 3, 4)
        buf = io.StringIO()
        write_strata_csv(tables, buf)
        again = read_strata_csv(io.StringIO(buf.getvalue()))
        assert again == tables

    @pytest.mark.parametrize("text", [
        "s,z,y,n\na,0,0,1\n",
        "stratum,z,y,count\na,0,0,1\n",
        "stratum,z,y,count\na,2,0,1\n",
        "stratum,z,y,count\na,0,0,1\na,0,0,2\n",
        "stratum,z,y,count\na,x,0,1\n",
        "stratum,z,y,count\n",
    ])
    def test_csv_errors(self, text):
        with pytest.raises((InvalidInput, InvalidTable)):
            read_strata_csv(io.StringIO(text))

    def test_json_forms(self):
        one = read_strata_json(io.StringIO('{"stratum": "x", "counts": [10, 20, 30, 40]}'))
        assert one["x"].counts == (10, 20, 30, 40)
        lines = read_strata_json(io.StringIO('{"stratum": "a", "counts": [1,2,3,4]}\n'
                                             '{"stratum": "b", "counts": [4,3,2,1]}\n'))
        assert list(lines) == ["a", "b"]
        with pytest.raises(InvalidInput):
            read_strata_json(io.StringIO('{"stratum": "a"}'))
