"""Resumable, cached downloads of EEGMMI records from the PhysioNet archive.

The cache mirrors the archive layout (S001/S001R04.edf), so a partial
mirror dropped into the cache directory is used as-is.  If a
SHA256SUMS.txt file (the archive's published checksum list) is present in
the cache directory, downloads are verified against it.
"""

import hashlib
import logging
import os
from pathlib import Path

import requests

from .errors import ChecksumError, FetchError, InvalidRecordError

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://physionet.org/files/eegmmidb/1.0.0"
BASE_URL_ENV = "EEGMI_ARCHIVE_URL"

N_SUBJECTS = 109
N_RUNS = 14
CHECKSUM_FILE = "SHA256SUMS.txt"


def record_relpath(subject_id, run_id):
    """Archive-relative path S{sss}/S{sss}R{rr}.edf; validates the catalogue range."""
    if not 1 <= subject_id <= N_SUBJECTS:
        raise InvalidRecordError(
            f"subject {subject_id} outside 1..{N_SUBJECTS}")
    if not 1 <= run_id <= N_RUNS:
        raise InvalidRecordError(f"run {run_id} outside 1..{N_RUNS}")
    return f"S{subject_id:03d}/S{subject_id:03d}R{run_id:02d}.edf"


def base_url():
    return os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL).rstrip("/")


def _load_checksums(cache_dir):
    path = Path(cache_dir) / CHECKSUM_FILE
    if not path.exists():
        return {}
    sums = {}
    for line in path.read_text().splitlines():
        parts = line.split()
        if len(parts) == 2:
            sums[parts[1].lstrip("./")] = parts[0].lower()
    return sums


def _verify(path, relpath, checksums):
    expected = checksums.get(relpath)
    if expected is None:
        return
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    if digest != expected:
        path.unlink()
        raise ChecksumError(
            f"{relpath}: sha256 {digest} != published {expected}; file removed")


def fetch_record(subject_id, run_id, cache_dir, timeout=60.0):
    """Return the local path of one record, downloading it if not cached.

    Idempotent: an existing cache file is returned without network I/O.
    Partial downloads resume via HTTP Range into a .part file.
    """
    relpath = record_relpath(subject_id, run_id)
    target = Path(cache_dir) / relpath
    if target.exists() and target.stat().st_size > 0:
        return target

    target.parent.mkdir(parents=True, exist_ok=True)
    url = f"{base_url()}/{relpath}"
    part = target.with_suffix(".edf.part")
    resume_from = part.stat().st_size if part.exists() else 0

    headers = {"Range": f"bytes={resume_from}-"} if resume_from else {}
    try:
        resp = requests.get(url, headers=headers, stream=True, timeout=timeout)
    except requests.RequestException as exc:
        raise FetchError(f"fetching {url}: {exc}") from exc

    if resp.status_code == 404:
        raise InvalidRecordError(f"{url}: not found in archive (404)")
    if resp.status_code == 416 or (resume_from and resp.status_code == 200):
        # server ignored/rejected the range: restart from scratch
        resume_from = 0
        try:
            resp = requests.get(url, stream=True, timeout=timeout)
        except requests.RequestException as exc:
            raise FetchError(f"fetching {url}: {exc}") from exc
    if resp.status_code not in (200, 206):
        raise FetchError(f"{url}: HTTP {resp.status_code}")

    mode = "ab" if resume_from else "wb"
    try:
        with open(part, mode) as fh:
            for chunk in resp.iter_content(chunk_size=1 << 16):
                fh.write(chunk)
    except requests.RequestException as exc:
        raise FetchError(f"download of {url} interrupted: {exc}") from exc

    part.replace(target)
    _verify(target, relpath, _load_checksums(cache_dir))
    logger.info("fetched %s (%d bytes)", relpath, target.stat().st_size)
    return target
