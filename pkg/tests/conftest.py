import pytest

from hoc.core import FaceCondition, faces_for


def face_bcs(dim=2, **overrides):
    """Dirichlet on every face except those given as keyword overrides."""
    out = {f: FaceCondition.dirichlet() for f in faces_for(dim)}
    out.update(overrides)
    return out


@pytest.fixture
def bcs():
    return face_bcs


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
