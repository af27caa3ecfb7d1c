import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtameta.exceptions import InputError
from dtameta.ingest import (
    CorrectedCounts,
    StudyTable,
    apply_correction,
    load_studies,
    parse_studies,
    prepare,
    transform_study,
)
from dtameta.numerics import logit

HEADER = "study,TP,FN,FP,TN\n"


class TestParse:
    def test_single_row(self):
        (t,) = parse_studies(HEADER + "s1,10,2,3,20")
        assert t == StudyTable("s1", 10, 2, 3, 20)

    def test_case_insensitive_header_and_order(self):
        studies = parse_studies("Study,tp,fn,fp,tn\na,1,2,3,4\nb,5,6,7,8\n")
        assert [s.id for s in studies] == ["a", "b"]

    def test_negative_count_cites_row(self):
        with pytest.raises(InputError) as exc:
            parse_studies(HEADER + "s1,-1,2,3,4")
        assert exc.value.row == 1
        assert exc.value.column == "TP"
        assert "row 1" in str(exc.value)

    @pytest.mark.parametrize(
        "text, row, column",
        [
            ("", None, None),
            (HEADER, None, None),
            ("study,TP,FN,FP\ns,1,2,3\n", 0, None),
            ("study,TP,FN,FP,TN,extra\ns,1,2,3,4,5\n", 0, None),
            ("study,TP,FN,TN,FP\ns,1,2,3,4\n", 0, None),
            (HEADER + "a,1,2,3,4\nb,1,2.5,3,4\n", 2, "FN"),
            (HEADER + "a,1,2,3,4\na,1,2,3,4\n", 2, "study"),
            (HEADER + "a,1,2,3\n", 1, None),
            (HEADER + "a,0,0,3,4\n", 1, None),
        ],
    )
    def test_errors(self, text, row, column):
        with pytest.raises(InputError) as exc:
            parse_studies(text)
        assert exc.value.row == row
        assert exc.value.column == column

    def test_column_map(self):
        text = "author,TP,FN,FP,TN\nx,1,2,3,4\n"
        (t,) = parse_studies(text, {"author": "study"})
        assert t.id == "x"

    def test_synthetic_file(self, synthetic_csv):
        assert len(load_studies(synthetic_csv)) == 17

    def test_not_utf8(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_bytes(b"study,TP,FN,FP,TN\n\xff,1,2,3,4\n")
        with pytest.raises(InputError):
            load_studies(p)


class TestCorrection:
    def test_all(self):
        c = apply_correction(StudyTable("a", 1, 1, 1, 1), 0.5, "all")
        assert (c.tp, c.fn, c.fp, c.tn) == (1.5, 1.5, 1.5, 1.5)

    def test_only_zero_untouched(self):
        c = apply_correction(StudyTable("a", 10, 2, 3, 20), 0.5, "only-zero")
        assert (c.tp, c.fn, c.fp, c.tn) == (10, 2, 3, 20)

    def test_only_zero_corrected(self):
        c = apply_correction(StudyTable("a", 0, 5, 7, 9), 0.5, "only-zero")
        assert (c.tp, c.fn, c.fp, c.tn) == (0.5, 5.5, 7.5, 9.5)

    def test_none(self):
        c = apply_correction(StudyTable("a", 0, 5, 7, 9), 0.5, "none")
        assert (c.tp, c.fn, c.fp, c.tn) == (0, 5, 7, 9)

    def test_if_any_zero(self):
        studies = [StudyTable("a", 0, 5, 7, 9), StudyTable("b", 3, 5, 7, 9)]
        corrected, _ = prepare(studies, 0.5, "if-any-zero")
        assert corrected[1].tp == 3.5
        corrected, _ = prepare(studies[1:], 0.5, "if-any-zero")
        assert corrected[0].tp == 3


class TestTransform:
    def test_symmetric_table(self):
        t = transform_study(CorrectedCounts("a", 1.5, 1.5, 1.5, 1.5))
        assert t.y == (0.0, 0.0)
        assert t.S.a11 == pytest.approx(4 / 3, abs=1e-15)
        assert t.S.a22 == pytest.approx(4 / 3, abs=1e-15)
        assert t.S.a12 == 0.0 and t.S.a21 == 0.0

    def test_hand_values(self):
        # 4.5 / (4.5 + 1.5) = 0.75; 1/4.5 + 1/1.5 = 0.888...
        t = transform_study(CorrectedCounts("a", 4.5, 1.5, 2.0, 8.0))
        assert t.y[0] == pytest.approx(1.0986122886681098, abs=1e-12)
        assert t.S.a11 == pytest.approx(0.8888888888888888, abs=1e-12)
        assert t.y[1] == pytest.approx(logit(0.2), abs=1e-12)
        assert t.S.a22 == pytest.approx(1 / 2 + 1 / 8, abs=1e-15)

    def test_zero_cell(self):
        with pytest.raises(InputError, match="correction"):
            transform_study(CorrectedCounts("a", 0.0, 1.0, 1.0, 1.0))

    def test_se(self):
        t = transform_study(CorrectedCounts("a", 3.0, 4.0, 5.0, 6.0))
        assert t.se[0] ** 2 == pytest.approx(t.S.a11, abs=1e-14)
        assert t.se[1] ** 2 == pytest.approx(t.S.a22, abs=1e-14)

    @given(*(st.floats(0.1, 1e4) for _ in range(4)))
    def test_group_swap_symmetry(self, tp, fn, fp, tn):
        a = transform_study(CorrectedCounts("a", tp, fn, fp, tn))
        b = transform_study(CorrectedCounts("b", fp, tn, tp, fn))
        assert a.y == (b.y[1], b.y[0])
        assert (a.S.a11, a.S.a22) == (b.S.a22, b.S.a11)
        assert a.S.a11 > 0 and a.S.a22 > 0

    @given(*(st.floats(0.5, 1e3) for _ in range(4)))
    def test_doubling_halves_variance(self, tp, fn, fp, tn):
        a = transform_study(CorrectedCounts("a", tp, fn, fp, tn))
        b = transform_study(CorrectedCounts("a", 2 * tp, 2 * fn, 2 * fp, 2 * tn))
        np.testing.assert_allclose(b.y, a.y, atol=1e-12)
        assert b.S.a11 == pytest.approx(a.S.a11 / 2, rel=1e-12)
        assert b.S.a22 == pytest.approx(a.S.a22 / 2, rel=1e-12)
