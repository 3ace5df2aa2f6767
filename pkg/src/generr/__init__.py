"""generr: a seeded simulation lab for generative-error bounds.

The package builds finite prompt/response worlds, trains toy conditional
models on sampled data, and empirically certifies the error lower and
upper bounds that connect generation to binary validity classification.
It also ships abstention-aware missing-mass estimators and a
penalty-based grading harness for benchmark records, all behind a
FastAPI service with a thin CLI client.
"""

__version__ = "0.1.0"
