import numpy as np
import pytest

from photoshadow.haar import RngSeed

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        prev = _ACCEPTANCE.get(number)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}"
        _ACCEPTANCE[number] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture
def gen():
    return RngSeed(20240601, 0).generator()


def random_pure_state(gen: np.random.Generator, d: int) -> np.ndarray:
    psi = gen.normal(size=d) + 1j * gen.normal(size=d)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())
