from .protocol import BlockKind, DDMode
from .analysis import FitStatus, SweepAxis, ReferenceMode

__all__ = [
    # Protocol
    "BlockKind",
    "DDMode",
    # Analysis
    "FitStatus",
    "SweepAxis",
    "ReferenceMode",
]
