"""Minimal EDF / EDF+ codec for single-channel ECG exchange.

Only what the pipeline needs is supported: one ECG channel at an integer
sample rate, plus an optional ``EDF Annotations`` channel. Annotations with
the text ``INVALID`` mark gaps (validity = False); ``PADDING`` marks zero
samples appended to fill the last data record, which are trimmed on read.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AmplitudeOverflow, MalformedHeader, TruncatedPayload, UnsupportedFeature
from .signal import EcgRecording, valid_runs

DIGITAL_MIN = -32768
DIGITAL_MAX = 32767
DEFAULT_PHYSICAL_RANGE = (-6.0, 6.0)
ANNOTATION_LABEL = "EDF Annotations"
BASE_DATE = dt.date(2020, 1, 1)

_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


@dataclass
class EdfSignalHeader:
    label: str
    physical_dimension: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    samples_per_record: int
    transducer: str = ""
    prefiltering: str = ""

    @property
    def is_annotation(self) -> bool:
        return self.label.strip() == ANNOTATION_LABEL

    @property
    def gain(self) -> float:
        return (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min)


@dataclass
class EdfHeader:
    version: str
    patient: str
    recording: str
    start: dt.datetime
    n_records: int
    record_duration: float
    signals: list[EdfSignalHeader] = field(default_factory=list)
    reserved: str = ""

    @property
    def header_bytes(self) -> int:
        return 256 * (len(self.signals) + 1)

    @property
    def is_edf_plus(self) -> bool:
        return self.reserved.startswith("EDF+")


def _field(value, width: int) -> bytes:
    text = str(value)
    if len(text) > width:
        raise ValueError(f"value {text!r} does not fit in {width} bytes")
    return text.ljust(width).encode("ascii")


def _num(value: float, width: int = 8) -> str:
    """Shortest decimal rendering of ``value`` that fits an EDF number field."""
    if float(value).is_integer():
        text = str(int(value))
    else:
        text = repr(float(value))
        if len(text) > width:
            digits = width - len(text.split(".")[0]) - 1
            text = f"{value:.{max(digits, 0)}f}"
    if len(text) > width:
        raise ValueError(f"{value} does not fit in {width} characters")
    return text


def _seconds(value: float) -> str:
    text = f"{value:.10f}".rstrip("0").rstrip(".")
    return text or "0"


def _tal(onset: float, text: str = "", duration: float | None = None) -> bytes:
    out = "+" + _seconds(onset)
    if duration is not None:
        out += "\x15" + _seconds(duration)
    return (out + "\x14" + text + "\x14\x00").encode("latin-1")


def parse_header(data: bytes) -> EdfHeader:
    if len(data) < 256:
        raise MalformedHeader("file shorter than the 256-byte fixed header")

    def text(a, b):
        return data[a:b].decode("latin-1").strip()

    version = text(0, 8)
    if version != "0":
        raise MalformedHeader(f"unexpected version field {version!r}")
    try:
        day, month, year = (int(x) for x in text(168, 176).split("."))
        hour, minute, second = (int(x) for x in text(176, 184).split("."))
        year += 1900 if year >= 85 else 2000
        start = dt.datetime(year, month, day, hour, minute, second)
        header_bytes = int(text(184, 192))
        n_records = int(text(236, 244))
        record_duration = float(text(244, 252))
        ns = int(text(252, 256))
    except ValueError as exc:
        raise MalformedHeader(f"unparseable fixed header field: {exc}") from None
    if ns < 1:
        raise MalformedHeader("header declares no signals")
    if header_bytes != 256 * (ns + 1):
        raise MalformedHeader(f"header size {header_bytes} inconsistent with {ns} signals")
    if len(data) < header_bytes:
        raise MalformedHeader("file shorter than its declared header")
    if record_duration <= 0:
        raise MalformedHeader("record duration must be positive")

    raw: dict[str, list[str]] = {}
    pos = 256
    for name, width in _SIGNAL_FIELDS:
        raw[name] = [data[pos + i * width: pos + (i + 1) * width].decode("latin-1").strip()
                     for i in range(ns)]
        pos += ns * width
    signals = []
    try:
        for i in range(ns):
            sig = EdfSignalHeader(
                label=raw["label"][i],
                transducer=raw["transducer"][i],
                physical_dimension=raw["physical_dimension"][i],
                physical_min=float(raw["physical_min"][i]),
                physical_max=float(raw["physical_max"][i]),
                digital_min=int(raw["digital_min"][i]),
                digital_max=int(raw["digital_max"][i]),
                prefiltering=raw["prefiltering"][i],
                samples_per_record=int(raw["samples_per_record"][i]),
            )
            if sig.physical_min >= sig.physical_max and not sig.is_annotation:
                raise MalformedHeader(f"signal {sig.label!r}: physical_min >= physical_max")
            if sig.digital_min >= sig.digital_max:
                raise MalformedHeader(f"signal {sig.label!r}: digital_min >= digital_max")
            if sig.samples_per_record < 1:
                raise MalformedHeader(f"signal {sig.label!r}: no samples per record")
            signals.append(sig)
    except ValueError as exc:
        if isinstance(exc, MalformedHeader):
            raise
        raise MalformedHeader(f"unparseable signal header field: {exc}") from None
    return EdfHeader(version=version, patient=text(8, 88), recording=text(88, 168), start=start,
                     n_records=n_records, record_duration=record_duration, signals=signals,
                     reserved=text(192, 236))


def _parse_tals(block: bytes):
    """Yield ``(onset, duration, [texts])`` from one annotation record."""
    for tal in block.split(b"\x00"):
        if not tal:
            continue
        parts = tal.decode("latin-1").split("\x14")
        head = parts[0]
        onset, _, duration = head.partition("\x15")
        try:
            onset_s = float(onset)
            duration_s = float(duration) if duration else 0.0
        except ValueError:
            raise MalformedHeader(f"bad annotation onset {head!r}") from None
        yield onset_s, duration_s, [p for p in parts[1:] if p]


def _pick_ecg(signals: list[EdfSignalHeader]) -> int:
    candidates = [i for i, s in enumerate(signals) if not s.is_annotation]
    if not candidates:
        raise MalformedHeader("no data signal in file")
    for i in candidates:
        if "ECG" in signals[i].label.upper() or "EKG" in signals[i].label.upper():
            return i
    return candidates[0]


def _identity(header: EdfHeader) -> tuple[str, int, float]:
    subject = header.patient.split()[0] if header.patient.split() else "unknown"
    match = re.search(r"\bday=(\d+)\b", header.recording)
    if match:
        day = int(match.group(1))
    else:
        day = max((header.start.date() - BASE_DATE).days, 0)
    offset = header.start.hour * 3600 + header.start.minute * 60 + header.start.second
    return subject, day, float(offset)


def read_edf(data: bytes) -> EcgRecording:
    """Decode EDF bytes into an :class:`EcgRecording` (first ECG signal)."""
    header = parse_header(data)
    idx = _pick_ecg(header.signals)
    sig = header.signals[idx]
    rate = sig.samples_per_record / header.record_duration
    if abs(rate - round(rate)) > 1e-9:
        raise UnsupportedFeature(f"non-integer sample rate {rate}")
    rate = int(round(rate))

    record_samples = sum(s.samples_per_record for s in header.signals)
    payload = memoryview(data)[header.header_bytes:]
    n_records = header.n_records
    if n_records < 0:
        n_records = len(payload) // (2 * record_samples)
    needed = n_records * record_samples * 2
    if len(payload) < needed:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, header declares {needed}")
    records = np.frombuffer(payload[:needed], dtype="<i2").reshape(n_records, record_samples)
    offsets = np.cumsum([0] + [s.samples_per_record for s in header.signals])
    digital = records[:, offsets[idx]:offsets[idx + 1]].reshape(-1).astype(np.float64)
    samples = (digital - sig.digital_min) * sig.gain + sig.physical_min

    validity = np.ones(len(samples), dtype=bool)
    keep = len(samples)
    for j, s in enumerate(header.signals):
        if not s.is_annotation:
            continue
        blocks = records[:, offsets[j]:offsets[j + 1]]
        for block in blocks:
            for onset, duration, texts in _parse_tals(block.astype("<i2").tobytes()):
                a = int(round(onset * rate))
                b = int(round((onset + duration) * rate))
                if "INVALID" in texts:
                    validity[max(a, 0):max(b, 0)] = False
                elif "PADDING" in texts:
                    keep = min(keep, max(a, 0))
    subject, day, offset = _identity(header)
    return EcgRecording(samples=samples[:keep], sample_rate=rate, subject_id=subject,
                        day_index=day, start_offset=offset, validity=validity[:keep])


def write_edf(recording: EcgRecording, physical_range=DEFAULT_PHYSICAL_RANGE) -> bytes:
    """Encode a recording as a one-channel EDF file (mV, 1 s data records).

    An ``EDF Annotations`` channel is added only when the recording has
    invalid samples or its length is not a whole number of seconds.
    """
    n = len(recording.samples)
    if n == 0:
        raise ValueError("cannot write an empty recording")
    pmin, pmax = (float(v) for v in physical_range)
    if pmin >= pmax:
        raise ValueError("physical range must be increasing")
    fs = recording.sample_rate
    x = np.where(recording.validity, recording.samples, 0.0)
    if not np.all(np.isfinite(x)):
        raise AmplitudeOverflow("non-finite sample")
    lo, hi = float(x.min()), float(x.max())
    if lo < pmin or hi > pmax:
        raise AmplitudeOverflow(f"samples span [{lo:.4f}, {hi:.4f}] mV outside [{pmin}, {pmax}]")

    n_records = -(-n // fs)
    pad = n_records * fs - n
    gaps = [(a, b) for a, b in valid_runs(~recording.validity)]

    scale = (DIGITAL_MAX - DIGITAL_MIN) / (pmax - pmin)
    digital = np.rint((x - pmin) * scale + DIGITAL_MIN)
    digital = np.clip(digital, DIGITAL_MIN, DIGITAL_MAX).astype("<i2")
    if pad:
        digital = np.concatenate([digital, np.zeros(pad, dtype="<i2")])
    data_block = digital.reshape(n_records, fs)

    annotated = bool(gaps) or pad > 0
    signals = [EdfSignalHeader(label="ECG", transducer="dry electrodes",
                               physical_dimension="mV", physical_min=pmin, physical_max=pmax,
                               digital_min=DIGITAL_MIN, digital_max=DIGITAL_MAX,
                               samples_per_record=fs)]
    if annotated:
        tals = [[_tal(r)] for r in range(n_records)]
        for a, b in gaps:
            tals[a // fs].append(_tal(a / fs, "INVALID", (b - a) / fs))
        if pad:
            tals[-1].append(_tal(n / fs, "PADDING", pad / fs))
        width = max(sum(len(t) for t in rec) for rec in tals)
        ann_spr = -(-width // 2)
        ann = np.zeros((n_records, ann_spr * 2), dtype=np.uint8)
        for r, rec in enumerate(tals):
            blob = b"".join(rec)
            ann[r, :len(blob)] = np.frombuffer(blob, dtype=np.uint8)
        ann_block = ann.view("<i2")
        signals.append(EdfSignalHeader(label=ANNOTATION_LABEL, physical_dimension="",
                                       physical_min=-1, physical_max=1,
                                       digital_min=DIGITAL_MIN, digital_max=DIGITAL_MAX,
                                       samples_per_record=ann_spr))
        data_block = np.concatenate([data_block, ann_block], axis=1)

    date = BASE_DATE + dt.timedelta(days=int(recording.day_index))
    secs = int(recording.start_offset) % 86400
    start_time = f"{secs // 3600:02d}.{secs % 3600 // 60:02d}.{secs % 60:02d}"
    patient = f"{recording.subject_id} X X X"
    rec_id = (f"Startdate {date.day:02d}-{date.strftime('%b').upper()}-{date.year} "
              f"X X ecgbench day={recording.day_index}")

    ns = len(signals)
    out = bytearray()
    out += _field("0", 8)
    out += _field(patient, 80)
    out += _field(rec_id, 80)
    out += _field(f"{date.day:02d}.{date.month:02d}.{date.year % 100:02d}", 8)
    out += _field(start_time, 8)
    out += _field(256 * (ns + 1), 8)
    out += _field("EDF+C" if annotated else "", 44)
    out += _field(n_records, 8)
    out += _field(1, 8)
    out += _field(ns, 4)
    for name, width in _SIGNAL_FIELDS:
        for s in signals:
            value = getattr(s, name, "")
            if name in ("physical_min", "physical_max"):
                value = _num(value)
            out += _field(value, width)
    out += np.ascontiguousarray(data_block, dtype="<i2").tobytes()
    return bytes(out)


def quantization_step(physical_range=DEFAULT_PHYSICAL_RANGE) -> float:
    return (physical_range[1] - physical_range[0]) / (DIGITAL_MAX - DIGITAL_MIN)


def load_edf(path) -> EcgRecording:
    return read_edf(Path(path).read_bytes())


def save_edf(recording: EcgRecording, path, physical_range=DEFAULT_PHYSICAL_RANGE) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_edf(recording, physical_range))
    return path


__all__ = ["EdfHeader", "EdfSignalHeader", "parse_header", "read_edf", "write_edf",
           "load_edf", "save_edf", "quantization_step"]
