import pytest

from runsupport import write_run_dir


@pytest.fixture
def basin_dir(tmp_path):
    rows = []
    labels = ("UpperCycle", "LowerCycle", "FixedPoint0", "FixedPointPi")
    for i, i0 in enumerate((-2.0, -1.0, 0.0, 1.0, 2.0)):
        for j, th in enumerate((0.0, 1.0, 2.0, 3.0)):
            rows.append((th, i0, labels[(i + j) % 4]))
    return write_run_dir(tmp_path / "basins_run",
                         {"basins.csv": (["theta0", "I0", "label"], rows)})


@pytest.fixture
def spectrum_dir(tmp_path):
    rows = []
    for om in (2.0, 2.5, 3.0, 3.5):
        for j in range(6):
            lam = (1.0 if j == 0 else 0.9 - 0.1 * j) * (1 - 0.01 * om)
            rows.append((om, j, lam, 0.0, abs(lam)))
    return write_run_dir(
        tmp_path / "spectrum_run",
        {"floquet_spectrum.csv": (["omega", "j", "re_lambda", "im_lambda",
                                   "abs_lambda"], rows)},
        subcommand="spectrum floquet")


@pytest.fixture
def overlay_dir(tmp_path):
    rows = []
    for i in range(-5, 6):
        rows.append((0.25 * i, 0.05 + 0.002 * i * i, "quantum"))
        rows.append((0.25 * i, 0.06 + 0.001 * i * i, "classical"))
    return write_run_dir(
        tmp_path / "compare_run",
        {"distributions.csv": (["I", "weight", "source"], rows)},
        subcommand="analyze compare")
