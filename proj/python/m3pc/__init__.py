"""Multi-scale variation-aware sampling for labeled point clouds."""

try:
    from ._m3 import errors, generate, partition, sample, tv_report
except ImportError:  # in-tree builds put the extension on PYTHONPATH directly
    from _m3 import errors, generate, partition, sample, tv_report

__all__ = ["errors", "generate", "partition", "sample", "tv_report"]
