import numpy as np
import pytest

from pucci_lab.operator import OperatorSpec


@pytest.fixture
def laplacian():
    return OperatorSpec(alpha=0.0, a=1.0, A=1.0, kind="weighted_laplacian")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting -----------------------------------------------------
# each acceptance check records (criterion, label, ok, detail); the terminal
# summary prints one PASS/FAIL line per criterion, aggregated over its checks

_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, label: str, ok: bool, detail: str = "") -> bool:
    _ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"criterion {criterion} [{label}] {'PASS' if ok else 'FAIL'}: {detail}")
    return bool(ok)


@pytest.fixture
def accept():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[n]
        ok = all(c[1] for c in checks)
        failed = [c for c in checks if not c[1]]
        detail = "; ".join(f"{label}: {d}" for label, _, d in (failed or checks))
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({len(checks) - len(failed)}/{len(checks)} checks)  {detail}")
