from datetime import datetime, timedelta, timezone

import pytest

from shipperf.core import KNOT, EnvironmentState, VesselParticulars, VoyageRecord

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


@pytest.fixture
def vessel():
    return VesselParticulars(
        length_overall=190.0,
        length_pp=183.0,
        beam=32.0,
        block_coefficient=0.7,
        bow_waterline_length=40.0,
        transverse_area_laden=450.0,
        transverse_area_ballast=600.0,
    )


def make_record(i=0, stw_kn=12.0, heading=0.0, minutes=60.0, power=5e6, draft=10.0, env=None, **kw):
    return VoyageRecord(
        timestamp=T0 + timedelta(minutes=minutes * i),
        stw=stw_kn * KNOT,
        sog=kw.pop("sog", stw_kn * KNOT),
        heading=heading,
        draft_aft=kw.pop("draft_aft", draft),
        draft_fwd=kw.pop("draft_fwd", draft),
        displacement=kw.pop("displacement", 40000.0),
        environment=env or EnvironmentState(),
        brake_power=power,
        **kw,
    )


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
