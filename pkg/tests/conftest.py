import pytest

from hiresim import backend

BACKENDS = ["python"] + (["compiled"] if backend.available() else [])


@pytest.fixture(params=BACKENDS)
def each_backend(request):
    """Run the test once per available backend."""
    backend.force(request.param)
    yield request.param
    backend.force(None)


@pytest.fixture
def compiled_backend():
    if not backend.available():
        pytest.skip("compiled extension not built")
    backend.force("compiled")
    yield
    backend.force(None)


# Acceptance outcomes, reported in the terminal summary: number -> list of (ok, detail)
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        tr.write_line(f"criterion {k:2d}: {status}  " + "; ".join(
            d + ("" if ok else " [fail]") for ok, d in parts))
