"""Statistical toolkit for ultra-reliable low-latency wireless links."""

__version__ = "0.1.0"
