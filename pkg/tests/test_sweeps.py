import math

import numpy as np
import pytest

from gaussqfi.errors import InvalidParameter
from gaussqfi.qfi_engine import j_dsv
from gaussqfi.sweeps import (
    DEFAULT_ETAS,
    SweepSpec,
    gnuplot_stub,
    output_paths,
    read_config,
    read_csv,
    run_sweep,
    spec_from_mapping,
    write_csv,
    write_results,
)


def by_eta(results):
    return {r.eta: r for r in results}


def assert_report_invariants(res):
    qfi, j, bound, n = (res.column(c) for c in ("qfi", "j_ratio", "delta_phi_bound", "n_bar"))
    pos = qfi > 0
    assert np.allclose(bound[pos], 1 / np.sqrt(qfi[pos]), rtol=1e-14)
    ok = n * res.eta > 0
    assert np.allclose(j[ok], np.sqrt(qfi[ok] / (res.eta * n[ok])), rtol=1e-14)


class TestSpec:
    def test_defaults(self):
        s = SweepSpec("dsv").resolved()
        assert s.etas == DEFAULT_ETAS and s.num == 60 and s.scale == "log"
        ax = s.axis()
        assert ax[0] == pytest.approx(0.1) and ax[-1] == pytest.approx(1e4) and len(ax) == 60

    def test_surface_defaults(self):
        s = SweepSpec("surface").resolved()
        assert s.num == 40 and s.stop == pytest.approx(math.asinh(math.sqrt(50)))

    def test_step(self):
        s = SweepSpec("dsdv-fixed-r", start=0, stop=1, step=0.25).resolved()
        assert np.allclose(s.axis(), [0, 0.25, 0.5, 0.75, 1.0])

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mode": "fig7"},
            {"mode": "dsv", "etas": ()},
            {"mode": "dsv", "etas": (1.2,)},
            {"mode": "dsv", "start": 5, "stop": 1},
            {"mode": "dsv", "start": 0.0},
            {"mode": "dsv", "num": 0},
            {"mode": "dsdv-fixed-r", "step": -1},
            {"mode": "dsv", "step": 0.1},
            {"mode": "custom", "vary": "r_a"},
            {"mode": "custom", "vary": "nothing", "start": 0, "stop": 1},
            {"mode": "custom", "vary": "r_a", "start": 0, "stop": 1, "params": {"bogus": 1.0}},
            {"mode": "dsdv-fixed-alpha", "alpha2": -1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParameter):
            SweepSpec(**kwargs).resolved()


class TestFigures:
    def test_dsv_curves(self):
        results = run_sweep(SweepSpec("dsv"))
        assert [r.eta for r in results] == list(DEFAULT_ETAS)
        for res in results:
            assert_report_invariants(res)
            j = res.column("j_ratio")
            assert np.all(np.diff(j) >= -1e-12)
            if res.eta < 1:
                assert np.all(j <= math.sqrt(1 / (1 - res.eta)))
            assert np.allclose(j, [j_dsv(n, res.eta) for n in res.column("n_bar")], rtol=1e-12)
        assert by_eta(results)[0.9].column("j_ratio")[-1] == pytest.approx(math.sqrt(10), rel=1e-2)

    def test_dsdv_fixed_alpha(self):
        results = run_sweep(SweepSpec("dsdv-fixed-alpha"))
        for res in results:
            assert_report_invariants(res)
            n = res.column("n_bar")
            assert n.min() >= 20 - 1e-9
            assert res.skipped == int(np.sum(SweepSpec("dsdv-fixed-alpha").resolved().axis() < 20))
            j = res.column("j_ratio")
            assert np.all(np.diff(j) >= -1e-12)
            if res.eta < 1:
                assert np.all(j <= math.sqrt(1 / (1 - res.eta)))
            assert np.allclose(res.column("delta_j"), j - res.column("j_dsv"), rtol=0, atol=1e-14)
            assert np.all(j >= 1 - 1e-12)

    def test_dsdv_fixed_alpha_starts_classical(self):
        (res,) = run_sweep(SweepSpec("dsdv-fixed-alpha", etas=(0.9,), start=20, stop=100, num=5, scale="linear"))
        assert res.column("r")[0] == 0.0
        assert res.column("j_ratio")[0] == pytest.approx(1.0, abs=1e-12)

    def test_delta_j_shrinks_in_magnitude(self):
        for res in run_sweep(SweepSpec("dsdv-fixed-alpha")):
            dj = np.abs(res.column("delta_j"))
            assert dj[-1] < dj[0] and dj[-1] < 1e-3

    def test_dsdv_fixed_r(self):
        for res in run_sweep(SweepSpec("dsdv-fixed-r", etas=(0.8,))):
            assert_report_invariants(res)
            assert res.column("alpha")[0] == 0.0
            assert np.all(np.diff(res.column("n_bar")) > 0)

    def test_surface(self):
        (res,) = run_sweep(SweepSpec("surface"))
        assert_report_invariants(res)
        assert res.skipped == 0
        j = res.column("j_ratio")
        ra, rb = res.column("r_a"), res.column("r_b")
        assert np.allclose(res.column("n_bar"), 100.0, rtol=1e-12)
        origin = (ra == 0) & (rb == 0)
        assert j[origin][0] == pytest.approx(1.0, abs=1e-12)
        best = np.argmax(j)
        assert ra[best] == rb[best] == pytest.approx(ra.max())

    def test_surface_skips_infeasible(self):
        (res,) = run_sweep(SweepSpec("surface", start=0, stop=3, num=4, n_bar=10))
        # sinh(2)^2 and sinh(3)^2 exceed 5, so rows/columns 2 and 3 are infeasible
        assert res.skipped == 16 - 4 and len(res.rows) == 4

    def test_custom_phi(self):
        (res,) = run_sweep(
            SweepSpec("custom", etas=(0.7,), vary="phi", start=0, stop=3, num=5, params={"r_a": 0.5, "alpha_abs_b": 1.0})
        )
        q = res.column("qfi")
        assert np.ptp(q) <= 1e-10 * q.max()

    def test_custom_skips_invalid(self):
        (res,) = run_sweep(SweepSpec("custom", etas=(0.7,), vary="r_a", start=-1, stop=1, num=5))
        assert res.skipped == 2 and len(res.rows) == 3


class TestOutput:
    def test_round_trip_bit_exact(self, tmp_path):
        results = run_sweep(SweepSpec("dsv", etas=(0.8,), num=25))
        (path,) = write_results(results, tmp_path)
        header, rows = read_csv(path)
        assert header == results[0].columns
        assert rows == results[0].rows

    def test_round_trip_special_values(self, tmp_path):
        rows = [(0.1, math.inf, math.nan, -0.0, 1e-300, 2**-1074)]
        write_csv(tmp_path / "x.csv", list("abcdef"), rows)
        _, back = read_csv(tmp_path / "x.csv")
        assert math.isinf(back[0][1]) and math.isnan(back[0][2])
        assert back[0][0] == 0.1 and back[0][4:] == rows[0][4:]

    def test_deterministic_bytes(self, tmp_path):
        spec = SweepSpec("surface", num=8)
        a = write_results(run_sweep(spec), tmp_path / "a.csv")
        b = write_results(run_sweep(spec), tmp_path / "b.csv")
        assert a[0].read_bytes() == b[0].read_bytes()

    def test_csv_format(self, tmp_path):
        (path,) = write_results(run_sweep(SweepSpec("dsv", etas=(0.5,), num=3)), tmp_path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n_bar,r,qfi,j_ratio,delta_phi_bound"
        assert len(lines) == 4 and "," in lines[1] and ";" not in lines[1]

    def test_single_file(self, tmp_path):
        results = run_sweep(SweepSpec("dsv", etas=(0.5, 0.9), num=4))
        (path,) = write_results(results, tmp_path / "all", single_file=True)
        assert path.name == "all.csv"
        header, rows = read_csv(path)
        assert header[0] == "eta" and len(rows) == 8
        assert [r[0] for r in rows] == [0.5] * 4 + [0.9] * 4

    def test_output_paths(self, tmp_path):
        assert output_paths(tmp_path, "dsv", [0.9, 1.0], False) == [tmp_path / "dsv_eta0.9.csv", tmp_path / "dsv_eta1.csv"]
        assert output_paths(tmp_path / "fig.csv", "dsv", [0.6], False) == [tmp_path / "fig_eta0.6.csv"]
        assert output_paths(tmp_path / "fig.csv", "dsv", [0.6, 0.8], True) == [tmp_path / "fig.csv"]

    def test_gnuplot_stub(self, tmp_path):
        results = run_sweep(SweepSpec("dsv", etas=(0.5, 0.9), num=3))
        paths = write_results(results, tmp_path)
        text = gnuplot_stub(paths, results, False)
        assert "set datafile separator ','" in text and str(paths[1]) in text
        assert "using 1:4" in text
        surface = run_sweep(SweepSpec("surface", num=3))
        assert "splot" in gnuplot_stub(write_results(surface, tmp_path), surface, False)

    def test_write_nothing(self, tmp_path):
        with pytest.raises(InvalidParameter):
            write_results([], tmp_path)


class TestConfig:
    def test_read_and_build(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("# figure 2\nmode = dsv\netas = 0.6, 0.9\nnum = 5\nstop = 100\nsingle-file = yes\n")
        spec, extra = spec_from_mapping(read_config(cfg))
        s = spec.resolved()
        assert s.etas == (0.6, 0.9) and s.num == 5 and s.stop == 100
        assert extra == {"single_file": "yes"}

    def test_sections_and_params(self, tmp_path):
        cfg = tmp_path / "s.ini"
        cfg.write_text("[sweep]\nmode = custom\nvary = r_b\nstart = 0\nstop = 1\nr_a = 0.4\n")
        spec, _ = spec_from_mapping(read_config(cfg))
        assert spec.params == {"r_a": 0.4} and spec.vary == "r_b"

    def test_missing_mode(self):
        with pytest.raises(InvalidParameter, match="mode"):
            spec_from_mapping({"num": "3"})

    def test_bad_value(self):
        with pytest.raises(InvalidParameter, match="bad config"):
            spec_from_mapping({"mode": "dsv", "num": "many"})

    def test_unparsable(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this line has no separator\n")
        with pytest.raises(InvalidParameter):
            read_config(cfg)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_config(tmp_path / "absent.cfg")
