import numpy as np
import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def report(name: str, passed: bool, detail: str = "") -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {name}" + (f" -- {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class ScriptedRNG:
    """Stand-in generator that hands out a fixed stream of uniforms in order."""

    def __init__(self, values):
        self.values = list(map(float, values))
        self.pos = 0

    def random(self, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        if self.pos + count > len(self.values):
            raise RuntimeError("scripted stream exhausted")
        out = np.array(self.values[self.pos : self.pos + count])
        self.pos += count
        return out.reshape(shape) if shape else float(out[0])

    @property
    def remaining(self):
        return len(self.values) - self.pos


@pytest.fixture
def scripted_rng():
    return ScriptedRNG
