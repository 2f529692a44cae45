"""Fault-zone classification for distance relays on series-compensated lines.

Line constants from tower geometry, an electromagnetic transient simulator,
db2 wavelet features and multiclass SVMs trained by SMO.
"""
__version__ = "0.1.0"
