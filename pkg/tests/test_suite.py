import pytest

from src.engine.gridfn import GridParams
from src.engine.verify.report import StatementId, Verdict, make_report
from src.engine.verify.suite import SUITE_STATEMENTS, SuitePlan, SuiteRunner, build_family


@pytest.fixture
def plan():
    return SuitePlan(statements=["main", "pair_moment", "second_lemma"], n_values=[0, 1],
                     widths=[0.125, 0.0625], scales=[1.0, 3.0], random_members=1)


def test_unknown_statement_is_rejected():
    with pytest.raises(ValueError, match="not available"):
        SuitePlan(statements=["main", "nonsense"])
    assert "aux_k1" in SUITE_STATEMENTS
    assert "kernel_sum" in SUITE_STATEMENTS


def test_family_size(small_grid):
    members = build_family(small_grid, [0.125, 0.0625], [1.0, 2.0], random_members=2)
    assert len(members) == 8
    assert [m.f_id for m in members[:2]] == ["dipole-w0.125", "dipole-w0.125*2"]
    assert members[-1].kind == "bumps"


def test_suite_reports_are_sorted_and_scale_invariant(sign_kernel, signed_square, small_grid, plan):
    reports = SuiteRunner(sign_kernel, signed_square, small_grid, plan).run()
    assert reports == sorted(reports, key=lambda r: r.sort_key)
    # 3 members x 2 scales: main + pair_moment + second_lemma at n = 0, 1
    assert len(reports) == 6 * 4
    mains = {r.f_id: r.ratio for r in reports if r.statement_id == "main"}
    assert mains["dipole-w0.125*3"] == pytest.approx(mains["dipole-w0.125"], rel=1e-9)
    assert mains["bumps-s0*3"] == pytest.approx(mains["bumps-s0"], rel=1e-9)


def test_thread_count_does_not_change_output(sign_kernel, signed_square, small_grid, plan):
    single = SuiteRunner(sign_kernel, signed_square, small_grid, plan, threads=1).run()
    pooled = SuiteRunner(sign_kernel, signed_square, small_grid, plan, threads=4).run()
    assert [r.to_record() for r in single] == [r.to_record() for r in pooled]


def test_empty_suite(sign_kernel, signed_square, small_grid):
    assert SuiteRunner(sign_kernel, signed_square, small_grid, SuitePlan(statements=[])).run() == []


def test_global_statements_run_once(sign_kernel, signed_square, small_grid):
    plan = SuitePlan(statements=["aux_k1", "aux_phi1"])
    reports = SuiteRunner(sign_kernel, signed_square, small_grid, plan).run()
    assert [r.statement_id for r in reports] == ["aux_k1", "aux_phi1"]


def test_judge_growth(sign_kernel, signed_square):
    grid = GridParams(d=1, half_width=0.5, cells_per_axis=128)
    members = build_family(grid, [0.125, 0.0625])
    runner = SuiteRunner(sign_kernel, signed_square, grid, SuitePlan(statements=["main"]))
    wide = make_report(StatementId.MAIN, "k", "phi", "dipole-w0.125", None, 1.0, 1.0)
    narrow = make_report(StatementId.MAIN, "k", "phi", "dipole-w0.0625", None, 2.0, 1.0)
    runner.judge_growth([wide, narrow], members)
    assert wide.verdict is Verdict.PASS
    assert narrow.verdict is Verdict.FAIL

    steady = make_report(StatementId.MAIN, "k", "phi", "dipole-w0.0625", None, 1.1, 1.0)
    runner.judge_growth([make_report(StatementId.MAIN, "k", "phi", "dipole-w0.125", None, 1.0, 1.0), steady],
                        members)
    assert steady.verdict is Verdict.PASS
