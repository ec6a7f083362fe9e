"""Feature extraction into TMEV event records.

Segments decoded media (WAV audio, NPY frame volumes) on fixed grids,
embeds each segment into the record feature dims, and writes files the
graph-learning package consumes unchanged.
"""
from tmev_extract.media import MediaError
from tmev_extract.records import RecordError

__all__ = ["MediaError", "RecordError"]
