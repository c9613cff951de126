from pmcrnet.cli import main
from pmcrnet.selftest import SELFTEST_CHECKS, format_table, run_checks


def test_selftest_has_at_least_twenty_checks_and_all_pass():
    results = run_checks(SELFTEST_CHECKS)
    assert len(results) >= 20
    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failed
    assert format_table(results)[-1] == f"{len(results)}/{len(results)} checks passed"


def test_selftest_cli_exit_codes(capsys):
    assert main(["selftest"]) == 0
    assert main(["selftest", "--inject-fault", "conv-backward"]) == 3
    out = capsys.readouterr().out
    assert "FAIL" in out
