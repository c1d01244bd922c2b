import pytest

from twfilm import closed_form, shooting
from twfilm.profile import RegimeParams
from twfilm.surface_tension import SurfaceTension


@pytest.fixture(scope="session")
def szysz():
    return SurfaceTension.szyszkowski(1.0, 1.0)


@pytest.fixture(scope="session")
def unit_params():
    return RegimeParams(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def unit_heteroclinic(szysz, unit_params):
    return shooting.heteroclinic(szysz, unit_params, xi_min=-30.0, xi_max=30.0)


@pytest.fixture(scope="session")
def regime_profiles(szysz, unit_heteroclinic):
    """One solver profile per regime, each on a window of at least [-20, 20]."""
    p00 = RegimeParams(0.0, 0.0, 0.5)
    p0d = RegimeParams(0.0, 1.0, 1.0)
    pg0 = RegimeParams(1.0, 0.0, 1.0)
    return {
        "G0_D0": (closed_form.solve_G0_D0(szysz, p00, -30.0, 30.0, 4001), p00),
        "G0_Dpos": (closed_form.solve_G0_Dpos(szysz, p0d, xi_min=-30.0, xi_max=30.0, samples=6001), p0d),
        "Gpos_D0": (closed_form.solve_Gpos_D0(szysz, pg0, -30.0, 30.0, 4001), pg0),
        "Gpos_Dpos": (unit_heteroclinic.profile, RegimeParams(1.0, 1.0, 1.0)),
    }


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; the lines are echoed at the end of the run."""
    log = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, title, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        log[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_ACCEPTANCE_KEY, {})
    if log:
        terminalreporter.section("acceptance criteria")
        for number in sorted(log):
            terminalreporter.write_line(log[number])
