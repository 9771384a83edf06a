import numpy as np
import pytest

from eegmi import edf

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def numeric_gradient(f, x, eps=1e-5):
    """Central finite differences of scalar f at array x."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        fp = f()
        x[idx] = orig - eps
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * eps)
    return g


def rel_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), 1e-8)
    return np.max(np.abs(analytic - numeric)) / scale


def make_eegmmi_recording(subject=1, run=4, seed=0, n_task_events=15,
                          fs=160, n_channels=64):
    """Synthetic recording shaped like an EEGMMI task run: T0 rests
    alternating with T1/T2 cues, 4.1 s cue windows."""
    rng = np.random.default_rng(seed)
    events = []
    t = 0.0
    for i in range(n_task_events):
        events.append(edf.AnnotationEvent(onset=round(t, 1), duration=4.2,
                                          code="T0"))
        t += 4.2
        code = "T1" if rng.random() < 0.5 else "T2"
        events.append(edf.AnnotationEvent(onset=round(t, 1), duration=4.1,
                                          code=code))
        t += 4.1
    n_seconds = int(np.ceil(t)) + 5
    samples = rng.integers(-2000, 2000,
                           size=(n_channels, n_seconds * fs)).astype(np.float64)
    return edf.Recording(subject_id=subject, run_id=run, sample_rate=fs,
                         channels=[f"C{i:02d}" for i in range(n_channels)],
                         samples=samples, events=events)


def write_eegmmi_file(cache_dir, subject, run, seed=None):
    rec = make_eegmmi_recording(subject, run,
                                seed=seed if seed is not None
                                else subject * 100 + run)
    target = cache_dir / f"S{subject:03d}" / f"S{subject:03d}R{run:02d}.edf"
    target.parent.mkdir(parents=True, exist_ok=True)
    edf.write_edf(rec, target)
    return target


@pytest.fixture
def eegmmi_cache(tmp_path):
    """A cache directory with subject 1's three task runs."""
    cache = tmp_path / "cache"
    for run in (4, 8, 12):
        write_eegmmi_file(cache, 1, run)
    return cache


def synth_convnet_data(n, seed, n_channels=64, n_samples=656, fs=160.0,
                       amplitude=2.0):
    """Separable two-class data: 10 Hz vs 22 Hz sinusoid on a fixed channel
    subset, buried in unit Gaussian noise."""
    rng = np.random.default_rng(seed)
    informative = np.arange(10, 26)
    t = np.arange(n_samples) / fs
    x = np.zeros((n, 1, n_channels, n_samples))
    y = np.zeros(n, dtype=np.int64)
    for i in range(n):
        cls = i % 2
        y[i] = cls
        freq = 10.0 if cls == 0 else 22.0
        sig = rng.standard_normal((n_channels, n_samples))
        sig[informative] += amplitude * np.sin(
            2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        x[i, 0] = sig
    return x, y
