import numpy as np
import pytest
from hypothesis import strategies as st


def random_hurwitz(rng, n, margin=(0.1, 1.0)):
    """Random ``J`` whose spectral abscissa is pushed below ``-margin``."""
    A = rng.normal(size=(n, n)) / np.sqrt(n)
    abscissa = np.max(np.linalg.eigvals(A).real)
    return A - (abscissa + rng.uniform(*margin)) * np.eye(n)


def random_psd(rng, n, rank=None):
    B = rng.normal(size=(n, rank or n))
    return B @ B.T / n


def rel_err(a, b, floor=0.0):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b))), floor) if b.size else 1.0
    return float(np.max(np.abs(a - b))) / (scale or 1.0) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# hypothesis: systems are described by a seed and a size, then built with numpy
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def sizes(lo=1, hi=6):
    return st.integers(min_value=lo, max_value=hi)


# fixed 4x4 system with exactly representable entries, used with frozen values
J4 = np.array([[-1.5, 0.5, 0.0, 0.25], [-0.75, -2.0, 1.0, 0.0],
               [0.0, -0.5, -0.5, 0.5], [0.25, 0.0, -1.0, -1.25]])
B4 = np.array([[1.0, 0.0, 0.0, 0.0], [0.5, 1.0, 0.0, 0.0],
               [0.0, 0.25, 0.5, 0.0], [0.0, 0.0, -0.5, 0.75]])
C4 = B4 @ B4.T

# 50-digit values: (w, {(i, j): S_ij})
S4_FROZEN = [
    (0.0, {(0, 0): 0.51126944888759633561, (0, 1): 0.090010178857059764432,
           (2, 3): -0.033226697687945324996, (3, 3): 0.53119092627599243856}),
    (0.3, {(0, 0): 0.49370812213238138995, (0, 1): 0.084130916566311293437 + 0.026429322634714140341j,
           (2, 3): -0.046429731074756539589 + 0.088575734369208656246j, (3, 3): 0.54528866556679674351}),
    (1.7, {(0, 0): 0.23060528373994269911, (0, 1): 0.055081275981949393692 + 0.084264342328084150226j,
           (2, 3): -0.077300965506207069022 + 0.082696484189408201386j, (3, 3): 0.26875519702762455131}),
    (12.0, {(0, 0): 0.0069289844668737300099, (0, 1): 0.0033870466809371044361 + 0.00091188179164661432293j,
            (2, 3): -0.0017462975050242585384 + 0.00030784609730677531033j,
            (3, 3): 0.0056459251943960383268}),
]
Q4_FROZEN = [21.826416015625, 19.013671875, 15.56640625, 5.4375, 1.0]
SIGMA4_FROZEN = np.array([
    [0.37766527226886489379, 0.10240999884776652234, -0.0010666093479334985519, 0.061171635917656318048],
    [0.10240999884776652234, 0.31502429454993565069, 0.081856088235696193138, -0.05904635103281131298],
    [-0.0010666093479334985519, 0.081856088235696193138, 0.14087558636966384077, -0.089768325394639966097],
    [0.061171635917656318048, -0.05904635103281131298, -0.089768325394639966097, 0.40904898749924323649],
])


# acceptance criteria report one line each; repeated in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
