import pytest

from lookadapt.harness.cli import main

# test name -> [criterion, passed, detail], filled by test_acceptance.py
ACCEPTANCE = {}
_current = {}


def record(criterion, passed, detail=""):
    ACCEPTANCE[_current["name"]] = [criterion, bool(passed), detail]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if not item.module.__name__.endswith("test_acceptance"):
        return
    if rep.when == "setup":
        _current["name"] = item.name
    if rep.failed or (rep.when == "call" and rep.passed):
        # the test outcome is authoritative, also when it failed before recording
        entry = ACCEPTANCE.setdefault(item.name, [item.name, False, f"{rep.when} failed"])
        entry[1] = entry[1] and rep.passed if rep.when == "call" else False


@pytest.fixture(scope="session")
def sanity_model(tmp_path_factory):
    """Parser overfit on the small person grammar, as the train command builds it."""
    path = tmp_path_factory.mktemp("sanity") / "model.ckpt"
    hist = path.with_suffix(".jsonl")
    assert main(["train", "--sample", "--stop-at", "1.0", "--set", "epochs=50",
                 "--out", str(path), "--history", str(hist)]) == 0
    return path, hist


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(ACCEPTANCE.values()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
