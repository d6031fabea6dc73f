"""Frame embedding extractor emitting mcvc embedding stores."""

from .extract import ExtractJob, extract, find_videos
from .video import DecodeError, probe

__version__ = "0.1.0"

__all__ = ["ExtractJob", "extract", "find_videos", "DecodeError", "probe", "__version__"]
