"""Pin BLAS to one thread before numpy loads: tests time single-threaded
runs and assert bit-reproducibility."""
import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
