"""NYU-depth-v2 archive conversion to the rgbdseg container layout."""

__version__ = "0.1.0"
