import numpy as np
import numpy.testing as npt
import pytest

from ecdr.dataset import (
    ColumnSchema,
    CombinedDataset,
    EmptyDataset,
    ExternalTreated,
    MissingColumn,
    NonBinaryIndicator,
    NonFiniteValue,
    load_csv,
    standardize,
    unstandardize,
)


@pytest.fixture
def schema():
    return ColumnSchema(outcome_column="y", treatment_column="t",
                        source_column="r", covariate_columns=["x1"])


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_three_row_counts(self, tmp_path, schema):
        path = write(tmp_path, "r,t,y,x1\n1,1,2.0,0.3\n1,0,1.0,-0.1\n0,0,0.5,0.2\n")
        data = load_csv(path, schema)
        assert data.n == 2
        assert data.N == 3
        assert data.pi_hat == pytest.approx(2 / 3)
        assert data.p_hat == pytest.approx(1 / 2)
        npt.assert_allclose(data.x, [[1, 0.3], [1, -0.1], [1, 0.2]])
        npt.assert_allclose(data.y, [2.0, 1.0, 0.5])

    def test_header_only_is_empty(self, tmp_path, schema):
        path = write(tmp_path, "r,t,y,x1\n")
        with pytest.raises(EmptyDataset):
            load_csv(path, schema)

    def test_study_shaped_file(self, tmp_path, schema):
        # 289 primary rows (111 treated) plus 554 external controls
        rng = np.random.default_rng(0)
        lines = ["r,t,y,x1"]
        for i in range(289):
            t = 1 if i < 111 else 0
            lines.append(f"1,{t},{rng.normal():.6f},{rng.normal():.6f}")
        for _ in range(554):
            lines.append(f"0,0,{rng.normal():.6f},{rng.normal():.6f}")
        data = load_csv(write(tmp_path, "\n".join(lines) + "\n"), schema)
        assert data.n == 289
        assert data.N == 843
        assert data.p_hat == pytest.approx(111 / 289)

    def test_missing_column(self, tmp_path, schema):
        path = write(tmp_path, "r,t,y\n1,1,2.0\n")
        with pytest.raises(MissingColumn):
            load_csv(path, schema)

    def test_non_binary_indicator(self, tmp_path, schema):
        path = write(tmp_path, "r,t,y,x1\n2,0,1.0,0.1\n")
        with pytest.raises(NonBinaryIndicator):
            load_csv(path, schema)
        # literal floats are rejected too
        path = write(tmp_path, "r,t,y,x1\n1.0,0,1.0,0.1\n")
        with pytest.raises(NonBinaryIndicator):
            load_csv(path, schema)

    def test_external_treated(self, tmp_path, schema):
        path = write(tmp_path, "r,t,y,x1\n1,1,2.0,0.1\n0,1,1.0,0.2\n")
        with pytest.raises(ExternalTreated):
            load_csv(path, schema)

    def test_non_finite(self, tmp_path, schema):
        path = write(tmp_path, "r,t,y,x1\n1,1,nan,0.1\n1,0,1.0,0.2\n")
        with pytest.raises(NonFiniteValue):
            load_csv(path, schema)

    def test_missing_value_fail_vs_drop(self, tmp_path, schema):
        text = "r,t,y,x1\n1,1,2.0,0.3\n1,0,,0.1\n1,0,1.0,0.2\n0,0,0.5,0.4\n"
        with pytest.raises(NonFiniteValue):
            load_csv(write(tmp_path, text), schema)
        drop = ColumnSchema("y", "t", "r", ["x1"], missing_policy="drop-row")
        data = load_csv(write(tmp_path, text), drop)
        assert data.N == 3

    def test_deterministic(self, tmp_path, schema):
        text = "r,t,y,x1\n1,1,2.0,0.3\n1,0,1.0,-0.1\n0,0,0.5,0.2\n"
        a = load_csv(write(tmp_path, text, "a.csv"), schema)
        b = load_csv(write(tmp_path, text, "b.csv"), schema)
        npt.assert_array_equal(a.x, b.x)
        npt.assert_array_equal(a.y, b.y)
        npt.assert_array_equal(a.r, b.r)
        npt.assert_array_equal(a.t, b.t)


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            ColumnSchema("y", "y", "r", ["x1"])

    def test_empty_covariates_rejected(self):
        with pytest.raises(ValueError):
            ColumnSchema("y", "t", "r", [])


class TestCombinedDataset:
    def test_invariants(self):
        with pytest.raises(ExternalTreated):
            CombinedDataset.from_columns([1, 0], [1, 1], [0.1, 0.2], [[0.1], [0.2]])
        with pytest.raises(Exception):
            # no treated primary subject
            CombinedDataset.from_columns([1, 1], [0, 0], [0.1, 0.2], [[0.1], [0.2]])

    def test_row_accessor(self):
        data = CombinedDataset.from_columns([1, 1, 0], [1, 0, 0],
                                            [2.0, 1.0, 0.5], [[0.3], [-0.1], [0.2]])
        row = data.row(0)
        assert (row.r, row.t, row.y) == (1, 1, 2.0)
        npt.assert_allclose(row.x, [1.0, 0.3])

    def test_immutable(self):
        data = CombinedDataset.from_columns([1, 1], [1, 0], [2.0, 1.0], [[0.3], [0.1]])
        with pytest.raises(ValueError):
            data.x[0, 0] = 5.0


class TestStandardize:
    def test_identity_on_standard_column(self):
        rng = np.random.default_rng(1)
        col = rng.standard_normal(500)
        col = (col - col.mean()) / col.std()
        data = CombinedDataset.from_columns(
            np.r_[np.ones(250), np.zeros(250)],
            np.r_[np.ones(125), np.zeros(375)],
            rng.standard_normal(500), col[:, None])
        out, info = standardize(data)
        npt.assert_allclose(out.x, data.x, atol=1e-12)
        assert info.constant_columns == []

    def test_two_point_column(self):
        data = CombinedDataset.from_columns([1, 1], [1, 0], [2.0, 1.0], [[0.0], [2.0]])
        out, _ = standardize(data)
        npt.assert_allclose(out.x[:, 1], [-1.0, 1.0])  # population 1/N variance

    def test_constant_column_flagged(self):
        data = CombinedDataset.from_columns(
            [1, 1, 0], [1, 0, 0], [2.0, 1.0, 0.5],
            [[3.0, 0.1], [3.0, -0.2], [3.0, 0.4]])
        out, info = standardize(data)
        assert info.constant_columns == [1]
        npt.assert_allclose(out.x[:, 1], 3.0)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        n = 200
        data = CombinedDataset.from_columns(
            np.r_[np.ones(100), np.zeros(100)],
            np.r_[np.ones(40), np.zeros(160)],
            rng.standard_normal(n), rng.normal(3.0, 2.5, (n, 4)))
        out, info = standardize(data)
        back = unstandardize(out, info)
        npt.assert_allclose(back.x, data.x, atol=1e-10)

    def test_linear_predictor_invariance(self):
        rng = np.random.default_rng(3)
        n = 150
        data = CombinedDataset.from_columns(
            np.r_[np.ones(75), np.zeros(75)],
            np.r_[np.ones(30), np.zeros(120)],
            rng.standard_normal(n), rng.normal(-1.0, 4.0, (n, 3)))
        out, info = standardize(data)
        c_std = rng.standard_normal(4)
        c_orig = info.map_coefficients_back(c_std.copy())
        npt.assert_allclose(data.x @ c_orig, out.x @ c_std, atol=1e-8)
