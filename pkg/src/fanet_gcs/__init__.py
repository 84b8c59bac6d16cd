"""Ground control station for single-hop drone surveillance.

Command a (real or simulated) drone over a UDP text protocol, fly scripted
missions, capture frames in flight, and enhance them with a deterministic
image-processing operation set, all behind a local HTTP/WebSocket service.
"""

__version__ = "0.1.0"
