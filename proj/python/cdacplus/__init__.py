"""Constrained deep adaptive clustering on precomputed embeddings."""

import json as _json

from ._core import (
    Dataset,
    InputError,
    NumericalError,
    RunConfig,
    acc,
    ari,
    evaluate,
    hungarian,
    kmeans,
    load_dataset,
    nmi,
    run_variant,
    save_binary,
    save_tsv,
    synthetic_blobs,
    variants,
)


def run(dataset, **options):
    """Run one variant with RunConfig fields given as keyword arguments.

    Returns the parsed report plus per-run predictions.
    """
    cfg = RunConfig()
    for key, value in options.items():
        if not hasattr(cfg, key):
            raise TypeError(f"unknown option {key!r}")
        setattr(cfg, key, value)
    report = run_variant(cfg, dataset)
    out = _json.loads(report.json())
    out["predictions"] = [dict(zip(r.ids, r.predictions)) for r in report.runs]
    return out


__all__ = [
    "Dataset", "InputError", "NumericalError", "RunConfig", "acc", "ari", "evaluate",
    "hungarian", "kmeans", "load_dataset", "nmi", "run", "run_variant", "save_binary", "save_tsv",
    "synthetic_blobs", "variants",
]
