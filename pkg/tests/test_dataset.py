import numpy as np
import pytest

from eegmi import dataset, edf
from eegmi.errors import ConfigError, DataError

from conftest import make_eegmmi_recording, write_eegmmi_file


def local_fetcher(subject, run, cache_dir):
    return cache_dir / f"S{subject:03d}" / f"S{subject:03d}R{run:02d}.edf"


class TestExtractEpochs:
    def test_one_epoch_per_cue(self):
        rec = make_eegmmi_recording(n_task_events=15)
        epochs, skipped = dataset.extract_epochs(rec)
        assert len(epochs) == 15
        assert skipped == 0
        for ep in epochs:
            assert ep.data.shape == (64, 656)
            assert ep.label in dataset.LABELS

    def test_epoch_starts_at_cue_onset(self):
        rec = make_eegmmi_recording(n_task_events=3, n_channels=4)
        epochs, _ = dataset.extract_epochs(rec)
        cues = [e for e in rec.events if e.code in ("T1", "T2")]
        for ep, cue in zip(epochs, cues):
            onset = int(round(cue.onset * rec.sample_rate))
            assert ep.onset_sample == onset
            assert np.array_equal(ep.data,
                                  rec.samples[:, onset:onset + 656])

    def test_label_mapping(self):
        rec = make_eegmmi_recording(n_task_events=8, n_channels=2)
        epochs, _ = dataset.extract_epochs(rec)
        cues = [e.code for e in rec.events if e.code != "T0"]
        assert [ep.label for ep in epochs] == \
            ["Left" if c == "T1" else "Right" for c in cues]

    def test_rest_events_produce_nothing(self):
        rec = make_eegmmi_recording(n_task_events=2, n_channels=2)
        rec.events = [e for e in rec.events if e.code == "T0"]
        epochs, skipped = dataset.extract_epochs(rec)
        assert epochs == [] and skipped == 0

    def test_overrunning_cue_skipped(self):
        rec = make_eegmmi_recording(n_task_events=3, n_channels=2)
        rec.events.append(edf.AnnotationEvent(
            onset=rec.n_samples / rec.sample_rate - 1.0, duration=4.1,
            code="T1"))
        epochs, skipped = dataset.extract_epochs(rec)
        assert len(epochs) == 3
        assert skipped == 1

    def test_no_events_is_an_error(self):
        rec = make_eegmmi_recording(n_task_events=1, n_channels=2)
        rec.events = []
        with pytest.raises(DataError):
            dataset.extract_epochs(rec)

    def test_data_is_a_copy(self):
        rec = make_eegmmi_recording(n_task_events=1, n_channels=2)
        epochs, _ = dataset.extract_epochs(rec)
        before = epochs[0].data.copy()
        rec.samples[:] = 0.0
        assert np.array_equal(epochs[0].data, before)


class TestBuildDataset:
    def test_pools_three_runs(self, eegmmi_cache):
        epochs = dataset.build_dataset([1], eegmmi_cache,
                                       fetcher=local_fetcher)
        assert len(epochs) == 45  # 15 cues per run, three runs
        assert {ep.run_id for ep in epochs} == {4, 8, 12}
        assert all(ep.subject_id == 1 for ep in epochs)

    def test_deterministic_order(self, eegmmi_cache):
        a = dataset.build_dataset([1], eegmmi_cache, fetcher=local_fetcher)
        b = dataset.build_dataset([1], eegmmi_cache, fetcher=local_fetcher)
        keys = [(ep.subject_id, ep.run_id, ep.onset_sample) for ep in a]
        assert keys == sorted(keys)
        assert keys == [(ep.subject_id, ep.run_id, ep.onset_sample)
                        for ep in b]
        for ea, eb in zip(a, b):
            assert np.array_equal(ea.data, eb.data)

    def test_subjects_sorted_regardless_of_input_order(self, tmp_path):
        cache = tmp_path / "cache"
        for s in (1, 2):
            for run in (4, 8, 12):
                write_eegmmi_file(cache, s, run)
        epochs = dataset.build_dataset([2, 1], cache, fetcher=local_fetcher)
        subjects = [ep.subject_id for ep in epochs]
        assert subjects == sorted(subjects)

    def test_duplicate_subjects_rejected(self, eegmmi_cache):
        with pytest.raises(ConfigError):
            dataset.build_dataset([1, 1], eegmmi_cache, fetcher=local_fetcher)

    def test_empty_subject_list_rejected(self, eegmmi_cache):
        with pytest.raises(ConfigError):
            dataset.build_dataset([], eegmmi_cache, fetcher=local_fetcher)

    def test_failing_subject_skipped(self, eegmmi_cache):
        epochs = dataset.build_dataset([1, 99], eegmmi_cache,
                                       fetcher=local_fetcher)
        assert len(epochs) == 45
        assert all(ep.subject_id == 1 for ep in epochs)

    def test_all_subjects_failing_is_fatal(self, tmp_path):
        with pytest.raises(DataError):
            dataset.build_dataset([98, 99], tmp_path / "empty",
                                  fetcher=local_fetcher)

    def test_transform_applied_before_extraction(self, eegmmi_cache):
        plain = dataset.build_dataset([1], eegmmi_cache,
                                      fetcher=local_fetcher)
        doubled = dataset.build_dataset(
            [1], eegmmi_cache, fetcher=local_fetcher,
            transform=lambda samples, fs: samples * 2.0)
        assert np.array_equal(doubled[0].data, plain[0].data * 2.0)


class TestEpochContainer:
    def test_round_trip(self, tmp_path):
        rec = make_eegmmi_recording(n_task_events=5, n_channels=8)
        epochs, _ = dataset.extract_epochs(rec)
        path = tmp_path / "epochs.bin"
        dataset.save_epochs(path, epochs)
        loaded = dataset.load_epochs(path)
        assert len(loaded) == len(epochs)
        for a, b in zip(epochs, loaded):
            assert (a.subject_id, a.run_id, a.onset_sample, a.label) == \
                (b.subject_id, b.run_id, b.onset_sample, b.label)
            # container stores float32, so compare at that precision
            assert np.array_equal(a.data.astype(np.float32), b.data)

    def test_magic_and_header_layout(self, tmp_path):
        rec = make_eegmmi_recording(n_task_events=1, n_channels=3)
        epochs, _ = dataset.extract_epochs(rec)
        path = tmp_path / "epochs.bin"
        dataset.save_epochs(path, epochs)
        raw = path.read_bytes()
        assert raw[:8] == b"EEGMIEPO"
        version, count, channels, samples, _ = \
            np.frombuffer(raw, dtype="<u4", count=5, offset=8)
        assert (version, count, channels, samples) == (1, 1, 3, 656)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOTEPOCH" + b"\x00" * 64)
        with pytest.raises(DataError):
            dataset.load_epochs(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        rec = make_eegmmi_recording(n_task_events=1, n_channels=2)
        epochs, _ = dataset.extract_epochs(rec)
        path = tmp_path / "epochs.bin"
        dataset.save_epochs(path, epochs)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(DataError):
            dataset.load_epochs(path)

    def test_empty_container_refused(self, tmp_path):
        with pytest.raises(DataError):
            dataset.save_epochs(tmp_path / "none.bin", [])

    def test_mixed_shapes_refused(self, tmp_path):
        rec = make_eegmmi_recording(n_task_events=2, n_channels=2)
        epochs, _ = dataset.extract_epochs(rec)
        epochs[1].data = epochs[1].data[:, :100]
        with pytest.raises(DataError):
            dataset.save_epochs(tmp_path / "bad.bin", epochs)
