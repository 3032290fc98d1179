import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellmtf_plots import SchemaError, read_northpole, read_snapshot, read_study_table
from helpers import write_northpole, write_snapshot, write_study


class TestStudyTable:
    def test_round_trip(self, tmp_path):
        path = write_study(
            tmp_path / "t.csv",
            rows=[(0.1, 1e-2, 2e-2), (0.05, None, 5e-3)],
            rates=[("re_inf2_v", 2.01)],
        )
        table = read_study_table(path)
        assert table.kind == "linear_tau"
        assert table.scenario == "demo"
        assert table.param == "tau"
        assert table.columns == ["re_inf2_v", "re_22_v"]
        assert table.values.tolist() == [0.1, 0.05]
        assert table.column("re_22_v").tolist() == [2e-2, 5e-3]
        assert np.isnan(table.column("re_inf2_v")[1])
        assert table.rates == {"re_inf2_v": 2.01}

    def test_integer_params_parse_as_floats(self, tmp_path):
        path = write_study(
            tmp_path / "t.csv", rows=[(2, 0.5), (5, 0.1)],
            param="L", columns=("re2_vD",),
        )
        table = read_study_table(path)
        assert table.values.tolist() == [2.0, 5.0]

    def test_missing_study_line(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("tau,re\n0.1,0.5\n")
        with pytest.raises(SchemaError, match="study"):
            read_study_table(p)

    def test_header_only_is_empty(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("# study linear_tau, scenario demo, param tau\ntau,re\n")
        with pytest.raises(SchemaError, match="no data rows"):
            read_study_table(p)

    def test_unrecognized_comment(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text(
            "# study linear_tau, scenario demo, param tau\n"
            "tau,re\n0.1,0.5\n# note to self\n"
        )
        with pytest.raises(SchemaError, match="comment"):
            read_study_table(p)

    def test_short_row(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text(
            "# study linear_tau, scenario demo, param tau\n"
            "tau,a,b\n0.1,0.5\n"
        )
        with pytest.raises(SchemaError, match="fields"):
            read_study_table(p)


class TestNorthpole:
    def test_round_trip(self, tmp_path):
        times = [0.0, 0.5, 1.0]
        pole_v = np.array([[0.0, 0.1], [0.4, 0.5], [0.6, 0.7]])
        path = write_northpole(tmp_path / "p.csv", times, pole_v)
        table = read_northpole(path)
        assert table.cell_ids == [0, 1]
        assert table.times[1].tolist() == times
        assert table.v[0].tolist() == [0.0, 0.4, 0.6]
        assert table.z[1].tolist() == [0.0, 0.0, 0.0]

    def test_header_mismatch(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("step,t,cell,voltage\n0,0.0,0,1.0\n")
        with pytest.raises(SchemaError, match="header"):
            read_northpole(p)

    def test_no_rows(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("step,t,cell,v,Z\n")
        with pytest.raises(SchemaError, match="no data"):
            read_northpole(p)


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        u = np.array([-1.0, 0.0, 1.0])
        v = np.array([2.0, 3.0])
        values = np.array([[1.0, np.nan], [2.0, 4.0], [np.nan, 8.0]])
        region = np.array([[0, 0], [1, 0], [0, 2]])
        path = write_snapshot(
            tmp_path / "s.csv", u, v, values, region, normal="y", offset=0.5, t=2.0
        )
        snap = read_snapshot(path)
        assert snap.normal_axis == "y"
        assert snap.offset == 0.5
        assert snap.axes == ("x", "z")
        assert snap.t == 2.0
        assert snap.u.tolist() == u.tolist()
        assert snap.v.tolist() == v.tolist()
        assert np.array_equal(snap.values, values, equal_nan=True)
        assert np.array_equal(snap.region, region)

    def test_missing_plane_line(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("x,y,z,value,region_id\n0.0,0.0,0.0,1.0,0\n")
        with pytest.raises(SchemaError, match="plane"):
            read_snapshot(p)

    def test_ragged_grid(self, tmp_path):
        path = write_snapshot(
            tmp_path / "s.csv", [0.0, 1.0], [0.0, 1.0],
            np.ones((2, 2)), normal="z",
        )
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(SchemaError, match="ragged"):
            read_snapshot(path)

    @settings(max_examples=30, deadline=None)
    @given(
        nu=st.integers(2, 6),
        nv=st.integers(2, 6),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_mirrored_file_gives_mirrored_grid(self, tmp_path_factory, nu, nv, seed):
        rng = np.random.default_rng(seed)
        tmp = tmp_path_factory.mktemp("mirror")
        u = np.linspace(-2.0, 3.0, nu)
        v = np.linspace(0.0, 1.0, nv)
        values = rng.standard_normal((nu, nv))
        values[rng.random((nu, nv)) < 0.2] = np.nan

        original = read_snapshot(
            write_snapshot(tmp / "a.csv", u, v, values, normal="y")
        )
        mirrored = read_snapshot(
            write_snapshot(tmp / "b.csv", -u[::-1], v, values[::-1], normal="y")
        )
        assert np.array_equal(mirrored.u, -original.u[::-1])
        assert np.array_equal(
            mirrored.values, original.values[::-1], equal_nan=True
        )
