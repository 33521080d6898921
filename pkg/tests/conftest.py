"""Shared fixtures: the worked nine-PoI example and small random instances."""
from __future__ import annotations

import numpy as np
import pytest

from walkdrive.encoding import Itinerary
from walkdrive.instance import Instance, MobilityConfig, Mode, Site, build_instance

W, D = Mode.WALK, Mode.DRIVE

# Location indices of the worked example.
S, I2, I3, I4, I5, I6, I7, I8, I9, JA, JB, JC = range(12)
NAMES = ["s", "i2", "i3", "i4", "i5", "i6", "i7", "i8", "i9", "ja", "jb", "jc"]
WINDOWS = {
    I2: (0, 75), I3: (50, 115), I4: (60, 95), I5: (60, 115), I6: (80, 135),
    I7: (150, 175), I8: (90, 245), I9: (90, 245), JA: (0, 300), JB: (0, 300), JC: (0, 300),
}
# (a, b): (walk, drive), stored symmetrically.
PAIRS = {
    (S, I2): (100, 25), (I2, I3): (100, 15), (I3, I4): (20, 25), (I4, I5): (5, 10),
    (I5, I3): (25, 30), (I3, I6): (40, 5), (I6, I7): (10, 15), (I7, I8): (20, 25),
    (I8, I9): (7, 10), (I9, I6): (27, 35), (I6, S): (40, 5), (I9, I3): (92, 95),
    (I2, I6): (20, 2),
    (S, JA): (100, 25), (JA, I2): (100, 25),
    (I5, JB): (28, 40), (JB, I6): (12, 40),
    (I2, JC): (40, 8), (JC, I3): (3, 10), (I5, JC): (28, 40), (JC, I6): (40, 8),
}


def worked_instance() -> Instance:
    n = len(NAMES)
    walk = np.full((n, n), 200.0)
    drive = np.full((n, n), 150.0)
    np.fill_diagonal(walk, 0)
    np.fill_diagonal(drive, 0)
    for (a, b), (tw, td) in PAIRS.items():
        walk[a, b] = walk[b, a] = tw
        drive[a, b] = drive[b, a] = td
    sites = []
    for idx, name in enumerate(NAMES):
        windows = ((WINDOWS[idx],),) if idx in WINDOWS else ((),)
        sites.append(Site(id=idx, lat=41.0 + idx * 1e-3, lon=16.8, score=0.0 if idx == S else 10.0,
                          visit_minutes=0.0 if idx == S else 5.0, windows=windows, group_id=idx))
    mobility = MobilityConfig(max_walking_time=30, min_driving_time=2, pickup_time=0, parking_time=0)
    return build_instance(sites, walk, drive, mobility, days=1, c_max=320, start_site=S, metric_closure=False)


def poi_of(instance: Instance, loc: int) -> int:
    return next(p.id for p in instance.pois if p.location == loc and not p.is_dummy)


def worked_itinerary(instance: Instance) -> Itinerary:
    seq = [I2, I3, I4, I5, I6, I7, I8, I9]
    modes = [D, D, W, W, D, W, W, W, D]
    return Itinerary.from_sequence(instance, 0, [poi_of(instance, x) for x in seq], modes)


@pytest.fixture
def worked():
    inst = worked_instance()
    return inst, worked_itinerary(inst)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
