"""Shared fixtures data and hypothesis strategies."""

from hypothesis import strategies as st

from gpata.model import DeviceState
from gpata.privacy import PrivacyProfile

SMALL_CITIES = {
    "north": {"a": [(0.0, 1.0), (0.5, 1.5)], "b": [(1.0, 1.0), (1.5, 1.2), (2.0, 1.1)]},
    "south": {"c": [(0.0, -2.0)], "d": [(3.0, -1.0), (3.5, -1.5)]},
}
SMALL_POINTS = [p for streets in SMALL_CITIES.values() for pts in streets.values() for p in pts]

ACCEPTANCE = {}


def report(number, title, ok, detail):
    """Record and print one acceptance line, then fail the test if the criterion does not hold."""
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    assert ok, line


levels = st.integers(0, 3)
profiles = st.builds(PrivacyProfile, levels, levels, levels)
device_states = st.builds(
    DeviceState,
    id=st.integers(0, 50),
    cpu_freq=st.floats(0.05, 5.0, allow_nan=False),
    cpu_usage=st.floats(0.0, 1.0, allow_nan=False),
    location=st.sampled_from(SMALL_POINTS),
    power_comp=st.floats(0.0, 20.0),
    power_trans_per_byte=st.floats(0.0, 1e-6),
)


def tiny_config(n_devices=1, per_cycle=1, deadline=10.0, cycles=1, privacy="low", **kw):
    """Single-city scenario with one server at the origin and devices on one street."""
    from gpata.model import EdgeServer
    from gpata.privacy import LocationHierarchy
    from gpata.scenario import DeviceSpec, ScenarioConfig, TaskGenConfig

    pts = [(0.1 * (i + 1), 0.0) for i in range(max(n_devices, 1))]
    h = LocationHierarchy({"c": {"s": pts}})
    devices = [DeviceSpec(i, 2.0, 0.2, pts[i], 2.0, 1e-7) for i in range(n_devices)]
    tasks = kw.pop("tasks", TaskGenConfig(per_cycle=per_cycle))
    return ScenarioConfig(devices=devices, servers=[EdgeServer(0, (0.0, 0.0))], hierarchy=h, seed=kw.pop("seed", 1),
                          cycles=cycles, deadline=deadline, privacy=privacy, tasks=tasks, **kw)
