"""Physics-guided heat pump stress classification toolkit."""

__version__ = "0.1.0"

N_CLASSES = 4
CLASS_NAMES = ("low", "medium-low", "medium-high", "high")
