"""ECG biometrics from interval statistics of the QRS complex.

Stages: EDF ingest, resampling and band-pass filtering, R-peak detection
and delineation, three-beat window features, user-vs-rest classifiers and a
pair-wise authentication protocol, plus a synthetic corpus generator.
"""

__version__ = "0.1.0"

from ._accel import BACKEND  # noqa: E402
from .errors import DataError, EcgBenchError, ProtocolViolation  # noqa: E402
from .signal import EcgRecording, Episode, split_clean_episodes  # noqa: E402

__all__ = ["__version__", "BACKEND", "DataError", "EcgBenchError", "ProtocolViolation",
           "EcgRecording", "Episode", "split_clean_episodes"]
