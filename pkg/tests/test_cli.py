import pytest

from hpcrack.cli import main


def _read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestSolve:
    def test_single_cycle_linear(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "solve", "--mode", "tensile", "--beta", "0", "--cycles", "1",
                "--n0", "4", "--out-dir", str(out),
            ]
        )
        assert code == 0
        header, rows = _read_csv(out / "run.csv")
        assert header == ["cycle", "n_dofs", "global_eta", "max_p", "min_h", "newton_iters"]
        assert len(rows) == 1
        assert rows[0][5] == "1"
        lig_header, lig_rows = _read_csv(out / "ligament.csv")
        assert lig_header == ["x", "ux", "t22", "eps22", "sed", "beta", "mode"]
        assert len(lig_rows) == 64
        assert all(r[6] == "tensile" for r in lig_rows)
        jmp_header, jmp_rows = _read_csv(out / "jumps.csv")
        assert jmp_header == ["x", "jump_ux", "jump_uy", "beta", "mode"]
        assert (out / "solution_0.vtu").exists()

    def test_mixed_run_has_both_jumps(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "solve", "--mode", "mixed", "--beta", "-10", "--cycles", "3",
                "--n0", "4", "--out-dir", str(out),
            ]
        )
        assert code == 0
        _, rows = _read_csv(out / "jumps.csv")
        jux = [abs(float(r[1])) for r in rows]
        juy = [abs(float(r[2])) for r in rows]
        assert min(jux) > 1e-8 and min(juy) > 1e-8
        # one VTU per cycle
        for k in range(3):
            assert (out / f"solution_{k}.vtu").exists()

    def test_17_digit_formatting(self, tmp_path):
        out = tmp_path / "out"
        main(
            [
                "solve", "--mode", "tensile", "--beta", "0", "--cycles", "1",
                "--n0", "4", "--out-dir", str(out),
            ]
        )
        _, rows = _read_csv(out / "ligament.csv")
        for r in rows:
            for cell in r[:5]:
                float(cell)  # locale-independent round-trip

    def test_huge_beta_fails_with_diagnostic(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            [
                "solve", "--mode", "tensile", "--beta", "1e9", "--cycles", "1",
                "--n0", "4", "--out-dir", str(out),
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "error:" in err
        assert any(
            name in err
            for name in ("InadmissibleStrain", "LineSearchStalled", "SingularMatrix", "MaxIterations")
        )

    def test_bad_flags_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--mode", "spiral"])
        assert exc.value.code == 2


class TestSweep:
    def test_merged_ligament(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "sweep-beta", "--mode", "tensile", "--betas=-5,0", "--cycles", "2",
                "--n0", "4", "--out-dir", str(out),
            ]
        )
        assert code == 0
        _, rows = _read_csv(out / "ligament.csv")
        betas = {r[5] for r in rows}
        assert betas == {"-5", "0"}
        assert len(rows) == 2 * 64

    def test_single_beta_matches_solve(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["solve", "--mode", "tensile", "--beta", "0", "--cycles", "2", "--n0", "4",
              "--out-dir", str(a)])
        main(["sweep-beta", "--mode", "tensile", "--betas", "0", "--cycles", "2", "--n0", "4",
              "--out-dir", str(b)])
        assert (a / "ligament.csv").read_text() == (b / "ligament.csv").read_text()

    def test_empty_betas_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["sweep-beta", "--mode", "tensile", "--betas", ","])
        assert exc.value.code == 2


class TestPlotPhi:
    def test_defaults_and_poles(self, tmp_path):
        out = tmp_path / "out"
        code = main(["plot-phi", "--out-dir", str(out)])
        assert code == 0
        header, rows = _read_csv(out / "plot_phi.csv")
        assert header == ["tr_t", "phi1", "phi2"]
        by_t = {float(r[0]): (float(r[1]), float(r[2])) for r in rows}
        assert by_t[0.0] == (1.0, 1.0)
        _, poles = _read_csv(out / "plot_phi_poles.csv")
        vals = {name: float(v) for name, v in poles}
        assert vals["t_cr1"] == pytest.approx(-10.0)

    def test_d3_changes_second_pole(self, tmp_path):
        out2, out3 = tmp_path / "d2", tmp_path / "d3"
        main(["plot-phi", "--d", "2", "--out-dir", str(out2)])
        main(["plot-phi", "--d", "3", "--out-dir", str(out3)])
        _, p2 = _read_csv(out2 / "plot_phi_poles.csv")
        _, p3 = _read_csv(out3 / "plot_phi_poles.csv")
        t2 = dict(p2)["t_cr2"]
        t3 = dict(p3)["t_cr2"]
        assert t2 != t3
        assert float(t2) == pytest.approx(1.0 / 0.21)
        assert dict(p2)["t_cr1"] == dict(p3)["t_cr1"]

    def test_custom_range(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["plot-phi", "--range=-2:2", "--samples", "41", "--out-dir", str(out)]
        )
        assert code == 0
        _, rows = _read_csv(out / "plot_phi.csv")
        assert len(rows) == 41  # no pole inside [-2, 2] for the defaults
        ts = [float(r[0]) for r in rows]
        assert ts[0] == -2.0 and ts[-1] == 2.0
