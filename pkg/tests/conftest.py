import numpy as np
import pytest


def sine(freq=220.0, seconds=1.0, fs=16000, amp=1.0, phase=0.0):
    t = np.arange(int(seconds * fs)) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


def direct_sdr(ref, est):
    """Independent SDR oracle: plain sums, no shared helpers."""
    ref = np.asarray(ref, dtype=float)
    err = ref - np.asarray(est, dtype=float)
    e = float(np.dot(err, err))
    return float("inf") if e == 0 else 10.0 * np.log10(float(np.dot(ref, ref)) / e)


@pytest.fixture
def rng():
    return np.random.default_rng(20241017)


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        print(_ACCEPTANCE[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
