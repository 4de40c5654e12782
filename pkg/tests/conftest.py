import math

import numpy as np
import pytest

from tndsens import SensitivityParams, validate_table

REFERENCE_PI = (0.1, 0.2, 0.3, 0.4)


@pytest.fixture
def reference_table():
    return validate_table(REFERENCE_PI)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_tables(n, seed=0, floor=1e-3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = rng.dirichlet(np.ones(4))
        if p.min() > floor:
            out.append(validate_table(p))
    return out


def rel_err(a, b):
    if math.isinf(a) and math.isinf(b):
        return 0.0
    return abs(a - b) / max(abs(b), 1e-300)


# one (criterion, status, detail) entry per acceptance criterion, printed after the run
ACCEPTANCE = []


def record(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE.append((num, status, detail))
    print(f"ACCEPTANCE {num}: {status} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, status, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"ACCEPTANCE {num:>2}: {status}  {detail}")
