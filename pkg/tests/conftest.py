import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ecgbench.features import FULL_SCHEMA, SELECTED_SCHEMA, LabeledDataset
from ecgbench.synth import FieldWeekConfig

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record an acceptance verdict; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str = ""):
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])


def quiet_config(**kw) -> FieldWeekConfig:
    base = dict(n_subjects=2, minutes_per_day=1.0, snr_db=None, powerline_mv=0.0,
                wander_mv=0.0, gaps_per_day=0, beat_jitter_ms=0.0, seed=3)
    base.update(kw)
    return FieldWeekConfig(**base)


def random_dataset(rng, subjects, per_day, days=range(1, 8), selected=True) -> LabeledDataset:
    """Feature-level dataset with per-(subject, day) supply ``per_day`` (int or callable)."""
    schema = SELECTED_SCHEMA if selected else FULL_SCHEMA
    X, subj, day, t0, seg = [], [], [], [], []
    segment = 0
    for s in subjects:
        for d in days:
            n = per_day(s, d) if callable(per_day) else per_day
            if n <= 0:
                continue
            X.append(rng.normal(size=(n, len(schema))))
            subj += [s] * n
            day += [d] * n
            t0.append(np.arange(n, dtype=float))
            seg.append(segment + np.arange(n) // 50)
            segment += n // 50 + 1
    return LabeledDataset(np.concatenate(X), schema, subj, day, np.concatenate(t0),
                          np.concatenate(seg))
