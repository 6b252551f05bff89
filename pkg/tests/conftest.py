import numpy as np

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def standing_wave(grid, t, k=2 * np.pi):
    """Closed vacuum solution: E2 = sin(k x3) sin(k t), H1 = -cos(k x3) cos(k t)."""
    _, _, x3 = grid.meshes()
    u = np.zeros((6,) + grid.shape)
    u[1] = np.sin(k * x3) * np.sin(k * t)
    u[3] = -np.cos(k * x3) * np.cos(k * t)
    return u


def random_spd(rng, size=6, floor=0.5):
    r = rng.normal(size=(size, size))
    return r @ r.T + floor * np.eye(size)
