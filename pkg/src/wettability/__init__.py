"""Contact-angle regression from texture and chemistry features."""

__version__ = "0.1.0"
