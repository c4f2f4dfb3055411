"""Proximity-keyed content pipeline.

Content is keyed to which wireless nodes a device can see (and how
strongly) instead of to coordinates. The pieces: a fingerprint data
model, a rule DSL and engine that turn fingerprints into content pages,
a deterministic indoor radio simulator, the sensor "DPI" web server,
and an HTTP proxy that enriches outgoing requests with the fingerprint.
"""

__version__ = "0.1.0"
