"""RGB-D indoor scene labeling with a shared-weight multiscale convnet."""

__version__ = "0.1.0"
