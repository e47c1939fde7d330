"""Streaming Schatten p-norm estimation with an exact spectral oracle."""

from .core import (
    GramStream,
    MatrixStream,
    MatrixUpdate,
    SpectralResult,
    embed_stream,
    gram_stream,
    materialize,
    schatten_norm_exact,
    singular_values,
    stream_from_dense,
    symmetric_embed,
    trace_power,
)
from .errors import SchattenError
from .multipass import MultipassState, new_multipass, run_all_passes
from .onepass import (
    BilinearSketchState,
    SchattenEstimate,
    estimate_general,
    new_onepass,
)
from .rand import FourWiseHash, SketchGenerator, mix64
from .roworder import RowOrderState, estimate_4z, new_roworder, run_roworder
from .streamio import read_stream, write_stream

__all__ = [
    "BilinearSketchState",
    "FourWiseHash",
    "GramStream",
    "MatrixStream",
    "MatrixUpdate",
    "MultipassState",
    "RowOrderState",
    "SchattenError",
    "SchattenEstimate",
    "SketchGenerator",
    "SpectralResult",
    "embed_stream",
    "estimate_4z",
    "estimate_general",
    "gram_stream",
    "materialize",
    "mix64",
    "new_multipass",
    "new_onepass",
    "new_roworder",
    "read_stream",
    "run_all_passes",
    "run_roworder",
    "schatten_norm_exact",
    "singular_values",
    "stream_from_dense",
    "symmetric_embed",
    "trace_power",
    "write_stream",
]

__version__ = "0.1.0"
