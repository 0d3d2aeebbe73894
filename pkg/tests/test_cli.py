import json

import pytest

from d4dr.cli import EXIT_FAIL, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, main, render_operator_entry
from d4dr.diffpoly import EPS, const, var
from d4dr.dr_quantum import polylog_ctilde, polylog_signed
from d4dr.fixtures import FIXTURES


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# -- rendering helpers -------------------------------------------------------------------


def test_render_operator_entry():
    assert render_operator_entry({1: const(2)}) == "2*dx"
    assert render_operator_entry({}) == "0"


def test_render_operator_with_dispersion():
    text = render_operator_entry({5: EPS**4, 3: EPS**2 * var("ut", 3)})
    assert text.startswith("eps^4*dx^5")
    assert "dx^3" in text


# -- exit codes --------------------------------------------------------------------------


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == EXIT_OK


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        [],
        ["ds", "nothing"],
        ["export", "--what", "no_such_fixture"],
        ["--jobs", "0", "ds", "poisson"],
        ["dr", "restrict"],
        ["dr", "restrict", "--kill", "1"],
        ["dr", "restrict", "--kill", "x"],
    ],
)
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_insufficient_truncation_is_internal_error(capsys):
    code, _, err = run(capsys, "--trunc", "5", "ds", "poisson")
    assert code == EXIT_INTERNAL
    assert "truncation error" in err


# -- commands ------------------------------------------------------------------------------


def test_ds_poisson(capsys, tmp_path):
    code, out, _ = run(capsys, "ds", "poisson", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "K^(4,4) = 2*dx" in out
    data = json.loads((tmp_path / "ds_poisson.json").read_text())
    assert data
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["files"]) == {"ds_poisson.json"}


def test_ds_densities(capsys):
    code, out, _ = run(capsys, "ds", "densities")
    assert code == EXIT_OK
    assert [line.split(" = ")[0] for line in out.splitlines()] == ["h_1,0", "h_1,1", "h_2,0", "h_3,0", "h_4,0"]


def test_global_flags_after_command(capsys):
    assert run(capsys, "ds", "poisson", "--trunc", "5")[0] == EXIT_INTERNAL


def test_export_fixture_formats(capsys):
    code, out, _ = run(capsys, "export", "--what", "ds_vtilde3")
    assert code == EXIT_OK and out.strip() == "(5/4*sqrt2)*eps*v3_1"
    code, out, _ = run(capsys, "export", "--what", "dr_normal_miura4", "--format", "latex")
    assert code == EXIT_OK and "u" in out
    code, out, _ = run(capsys, "export", "--what", "ds_vtilde3", "--format", "json")
    (row,) = json.loads(out)
    assert code == EXIT_OK and row["eps"] == 1 and row["vars"] == [["v", 3, 1, 1]]


def test_export_matrix_fixture(capsys):
    code, out, _ = run(capsys, "export", "--what", "ds_poisson_first")
    assert code == EXIT_OK and "K^(4,4) = 2*dx" in out
    code, out, _ = run(capsys, "export", "--what", "b3_operator")
    assert code == EXIT_OK and "K^(2,2) = 6*dx" in out and "K^(1,1) = 0" in out


def test_export_fixture_list(capsys):
    code, out, _ = run(capsys, "export", "--what", "fixtures")
    assert code == EXIT_OK
    assert len(out.splitlines()) == len(FIXTURES)


def test_export_polylog(capsys):
    code, out, _ = run(capsys, "export", "--what", "polylog")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["1,1"] == {"ctilde": ["-1/6", "0", "1/6"], "signed": ["1/6", "0", "1/6"]}
    for key, row in data.items():
        ds = tuple(int(t) for t in key.split(","))
        assert row["ctilde"] == [str(c) for c in polylog_ctilde(*ds)]
        assert row["signed"] == [str(c) for c in polylog_signed(*ds)]


def test_verify_ds_reports_printed_discrepancies(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "ds")
    assert code == EXIT_FAIL
    assert "[PASS] ds/first_poisson_matrix" in out
    assert "[FAIL] ds/inverse_normal_miura" in out
    assert "ut3_4" in out  # the offending monomial is listed
    assert out.rstrip().endswith("4/6 checks passed")


def test_manifest_independent_of_jobs(capsys, tmp_path):
    outs = []
    for jobs in ("1", "2"):
        d = tmp_path / f"jobs{jobs}"
        code, out, _ = run(capsys, "verify", "--suite", "ds", "--jobs", jobs, "--out", str(d))
        assert code == EXIT_FAIL
        outs.append(out)
        assert (d / "manifest.json").exists()
    assert outs[0] == outs[1]
    m1, m2 = ((tmp_path / f"jobs{j}" / "manifest.json").read_bytes() for j in ("1", "2"))
    assert m1 == m2
    assert (tmp_path / "jobs1" / "verify_ds.json").read_bytes() == (tmp_path / "jobs2" / "verify_ds.json").read_bytes()


@pytest.mark.slow
def test_verify_quantum_suite(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "quantum")
    assert code == EXIT_OK
    assert "[PASS] quantum/quantum_solve" in out
    assert "[PASS] quantum/polylog_oracle" in out
